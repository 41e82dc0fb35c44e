#include "cdpforge/learning.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "cdpforge/metrics.hpp"
#include "cdpforge/parallel.hpp"
#include "cdpforge/pattern_io.hpp"
#include "json.hpp"

namespace cdpforge {

std::string_view to_string(GradMode mode) {
  return mode == GradMode::full ? "full" : "phase_detached";
}

GradMode parse_grad_mode(std::string_view name) {
  if (name == "phase_detached") return GradMode::phase_detached;
  if (name == "full") return GradMode::full;
  throw std::invalid_argument("unknown grad_mode '" + std::string(name) + "'");
}

void validate(const TrainConfig& cfg) {
  if (cfg.pattern_count < 1) throw std::invalid_argument("patterns.count must be >= 1");
  if (cfg.epochs < 0) throw std::invalid_argument("train.epochs must be >= 0");
  if (!(cfg.pattern_lr > 0.0)) throw std::invalid_argument("train.lr must be positive");
  if (!(cfg.adam_beta1 > 0.0 && cfg.adam_beta1 < 1.0)) {
    throw std::invalid_argument("train.beta1 must lie in (0,1)");
  }
  if (!(cfg.adam_beta2 > 0.0 && cfg.adam_beta2 < 1.0)) {
    throw std::invalid_argument("train.beta2 must lie in (0,1)");
  }
  if (!(cfg.adam_eps > 0.0)) throw std::invalid_argument("train.eps must be positive");
  if (!(cfg.init_lo <= cfg.init_hi) || !std::isfinite(cfg.init_lo) || !std::isfinite(cfg.init_hi)) {
    throw std::invalid_argument("patterns.init range must satisfy lo <= hi");
  }
  if (cfg.checkpoint_every < 0) throw std::invalid_argument("train.checkpoint_every must be >= 0");
  validate(cfg.solver);
}

AdamState AdamState::zeros_like(const PatternParams& params) {
  AdamState s;
  for (const auto& theta : params.thetas) {
    s.m.emplace_back(theta.shape(), 0.0);
    s.v.emplace_back(theta.shape(), 0.0);
  }
  return s;
}

namespace {

void check_batch(const PatternParams& params, std::span<const Signal> batch, const TrainConfig& cfg) {
  validate(params);
  if (batch.empty()) throw std::invalid_argument("training batch is empty");
  for (const auto& x : batch) require_same_shape(params.shape(), x.shape(), "training batch");
  validate(cfg.solver);
}

// Forward/backward through one sample. Adds d(loss)/d(d_t) into mask_grad
// and returns the sample loss.
//
// Forward (c = 2 alpha / T, S = sum_t d_t^2):
//   u_t = F(d_t g), y_t = |u_t|, x^0 = 0
//   z_t = F(d_t x^{k-1}), p_t = phase(z_t), w_t = F*(p_t y_t)
//   x^k = x^{k-1} - c (S x^{k-1} - sum_t d_t Re w_t)
//   loss = ||g - x^K||^2
double sample_backward(const std::vector<Real2D>& masks, const Real2D& truth, double alpha,
                       int iterations, GradMode mode, std::vector<Real2D>& mask_grad) {
  const std::size_t count = masks.size();
  const Shape shape = truth.shape();
  const std::size_t n = shape.size();
  const double c = alpha * 2.0 / static_cast<double>(count);
  const auto layers = static_cast<std::size_t>(iterations);

  Real2D energy(shape, 0.0);
  for (const auto& d : masks) {
    for (std::size_t i = 0; i < n; ++i) energy[i] += d[i] * d[i];
  }

  std::vector<Complex2D> clean(count, Complex2D(shape));
  std::vector<Real2D> amps(count, Real2D(shape));
  for (std::size_t t = 0; t < count; ++t) {
    for (std::size_t i = 0; i < n; ++i) clean[t][i] = {masks[t][i] * truth[i], 0.0};
    fft2u_inplace(clean[t]);
    for (std::size_t i = 0; i < n; ++i) amps[t][i] = std::abs(clean[t][i]);
  }

  // Tape: iterate entering each layer, the fields z_t and Re w_t of each layer.
  std::vector<Real2D> xs(layers, Real2D(shape));
  std::vector<Complex2D> fields(layers * count, Complex2D(shape));
  std::vector<Real2D> backs(layers * count, Real2D(shape));

  Real2D x(shape, 0.0);
  Real2D back(shape);
  Complex2D work(shape);
  for (std::size_t k = 0; k < layers; ++k) {
    xs[k] = x;
    std::fill(back.begin(), back.end(), 0.0);
    for (std::size_t t = 0; t < count; ++t) {
      const Real2D& d = masks[t];
      Complex2D& z = fields[k * count + t];
      for (std::size_t i = 0; i < n; ++i) z[i] = {d[i] * x[i], 0.0};
      fft2u_inplace(z);
      for (std::size_t i = 0; i < n; ++i) work[i] = unit_phase(z[i]) * amps[t][i];
      ifft2u_inplace(work);
      Real2D& w = backs[k * count + t];
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = work[i].real();
        back[i] += d[i] * w[i];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      x[i] -= c * (energy[i] * x[i] - back[i]);
    }
    if (!all_finite(x)) {
      throw DivergenceError("unrolled solver: non-finite iterate at layer " + std::to_string(k + 1));
    }
  }

  double loss = 0.0;
  Real2D xbar(shape);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = truth[i] - x[i];
    loss += r * r;
    xbar[i] = -2.0 * r;
  }

  std::vector<Real2D> amp_bar(count, Real2D(shape, 0.0));
  Real2D xbar_prev(shape);
  Complex2D qbar(shape);
  Complex2D zbar(shape);
  for (std::size_t k = layers; k-- > 0;) {
    const Real2D& xprev = xs[k];
    for (std::size_t i = 0; i < n; ++i) xbar_prev[i] = xbar[i] * (1.0 - c * energy[i]);

    for (std::size_t t = 0; t < count; ++t) {
      const Real2D& d = masks[t];
      const Real2D& w = backs[k * count + t];
      const Complex2D& z = fields[k * count + t];
      Real2D& dbar = mask_grad[t];
      for (std::size_t i = 0; i < n; ++i) {
        dbar[i] += xbar[i] * c * (w[i] - 2.0 * d[i] * xprev[i]);
        qbar[i] = {c * xbar[i] * d[i], 0.0};
      }
      // Re w = Re F*(q): the cotangent of q is F(cotangent of Re w).
      fft2u_inplace(qbar);
      for (std::size_t i = 0; i < n; ++i) {
        const std::complex<double> p = unit_phase(z[i]);
        amp_bar[t][i] += p.real() * qbar[i].real() + p.imag() * qbar[i].imag();
      }
      if (mode == GradMode::full) {
        for (std::size_t i = 0; i < n; ++i) {
          const double r = std::abs(z[i]);
          if (r > 0.0) {
            const std::complex<double> p = z[i] / r;
            const std::complex<double> pbar = qbar[i] * amps[t][i];
            const double radial = p.real() * pbar.real() + p.imag() * pbar.imag();
            zbar[i] = (pbar - p * radial) / r;
          } else {
            zbar[i] = 0.0;
          }
        }
        ifft2u_inplace(zbar);
        for (std::size_t i = 0; i < n; ++i) {
          const double vbar = zbar[i].real();
          xbar_prev[i] += d[i] * vbar;
          dbar[i] += xprev[i] * vbar;
        }
      }
    }
    if (!all_finite(xbar_prev)) {
      throw DivergenceError("unrolled backward: non-finite cotangent at layer " +
                            std::to_string(k + 1));
    }
    std::swap(xbar, xbar_prev);
  }

  // Through y_t = |F(d_t g)|.
  for (std::size_t t = 0; t < count; ++t) {
    Complex2D& ubar = zbar;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::abs(clean[t][i]);
      ubar[i] = r > 0.0 ? amp_bar[t][i] * clean[t][i] / r : std::complex<double>(0.0);
    }
    ifft2u_inplace(ubar);
    for (std::size_t i = 0; i < n; ++i) mask_grad[t][i] += truth[i] * ubar[i].real();
  }
  return loss;
}

}  // namespace

double unrolled_loss(const PatternParams& params, std::span<const Signal> batch,
                     const TrainConfig& cfg) {
  check_batch(params, batch, cfg);
  const PatternSet patterns = patterns_from_params(params);
  double total = 0.0;
  for (const auto& x : batch) {
    const MeasurementSet meas = measure(x, patterns);
    SolverConfig solver = cfg.solver;
    solver.algorithm = Algorithm::altmin;
    solver.record_trace = false;
    const SolveResult res = solve_cdp(meas, patterns, solver);
    for (std::size_t i = 0; i < x.plane().size(); ++i) {
      const double r = x.plane()[i] - res.estimate.plane()[i];
      total += r * r;
    }
  }
  return total;
}

LossGradient unrolled_loss_and_gradient(const PatternParams& params,
                                        std::span<const Signal> batch, const TrainConfig& cfg) {
  check_batch(params, batch, cfg);
  const PatternSet patterns = patterns_from_params(params);
  const std::size_t count = params.count();
  const double alpha = altmin_step(cfg.solver, count);
  const Shape shape = params.shape();

  std::vector<double> losses(batch.size(), 0.0);
  std::vector<PatternGradient> grads(batch.size());
  parallel_for(batch.size(), cfg.threads, [&](std::size_t s) {
    PatternGradient g(count, Real2D(shape, 0.0));
    losses[s] = sample_backward(patterns.masks, batch[s].plane(), alpha, cfg.solver.iterations,
                                cfg.grad_mode, g);
    // Chain through the sigmoid: dd/dtheta = d (1 - d).
    for (std::size_t t = 0; t < count; ++t) {
      const Real2D& d = patterns.masks[t];
      for (std::size_t i = 0; i < g[t].size(); ++i) g[t][i] *= d[i] * (1.0 - d[i]);
    }
    grads[s] = std::move(g);
  });

  LossGradient out{0.0, PatternGradient(count, Real2D(shape, 0.0))};
  for (std::size_t s = 0; s < batch.size(); ++s) {
    out.loss += losses[s];
    for (std::size_t t = 0; t < count; ++t) {
      for (std::size_t i = 0; i < out.grad[t].size(); ++i) out.grad[t][i] += grads[s][t][i];
    }
  }
  return out;
}

PatternGradient pattern_gradient(const PatternParams& params, std::span<const Signal> batch,
                                 const TrainConfig& cfg) {
  return unrolled_loss_and_gradient(params, batch, cfg).grad;
}

void adam_step(AdamState& state, PatternParams& params, const PatternGradient& grad,
               const TrainConfig& cfg) {
  if (state.m.size() != params.count() || state.v.size() != params.count() ||
      grad.size() != params.count()) {
    throw ShapeError("adam_step: optimizer state, gradient and parameters disagree in count");
  }
  state.t += 1;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t t = 0; t < params.count(); ++t) {
    Real2D& theta = params.thetas[t];
    require_same_shape(theta.shape(), grad[t].shape(), "adam_step");
    require_same_shape(theta.shape(), state.m[t].shape(), "adam_step");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[t][i];
      double& m = state.m[t][i];
      double& v = state.v[t][i];
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g * g;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      theta[i] -= cfg.pattern_lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

PatternParams initial_params(Shape shape, const TrainConfig& cfg) {
  Rng rng(cfg.seed);
  PatternParams params;
  for (std::size_t t = 0; t < cfg.pattern_count; ++t) {
    Real2D theta(shape);
    for (auto& v : theta) v = rng.uniform(cfg.init_lo, cfg.init_hi);
    params.thetas.push_back(std::move(theta));
  }
  return params;
}

namespace {

std::size_t batches_per_epoch(std::size_t dataset_size, const TrainConfig& cfg) {
  if (cfg.batch_size == 0 || cfg.batch_size >= dataset_size) return 1;
  return (dataset_size + cfg.batch_size - 1) / cfg.batch_size;
}

double mean_holdout_psnr(const PatternSet& patterns, std::span<const Signal> holdout,
                         const TrainConfig& cfg) {
  std::vector<double> values(holdout.size());
  SolverConfig solver = cfg.solver;
  solver.record_trace = false;
  parallel_for(holdout.size(), cfg.threads, [&](std::size_t i) {
    const SolveResult res = solve_cdp(measure(holdout[i], patterns), patterns, solver);
    values[i] = psnr(holdout[i], res.estimate);
  });
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

int epochs_from_steps(std::int64_t steps, std::size_t dataset_size, const TrainConfig& cfg) {
  const auto per_epoch = static_cast<std::int64_t>(batches_per_epoch(dataset_size, cfg));
  if (steps % per_epoch != 0) {
    throw std::invalid_argument("optimizer step count is not a whole number of epochs");
  }
  return static_cast<int>(steps / per_epoch);
}

TrainResult train(std::span<const Signal> dataset, const TrainConfig& cfg, const TrainHooks& hooks,
                  const std::optional<TrainCheckpoint>& resume) {
  validate(cfg);
  if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
  const Shape shape = dataset.front().shape();
  for (const auto& x : dataset) require_same_shape(shape, x.shape(), "training dataset");

  TrainResult result;
  int start_epoch = 0;
  if (resume) {
    validate(resume->params);
    require_same_shape(shape, resume->params.shape(), "resume checkpoint");
    if (resume->params.count() != cfg.pattern_count) {
      throw std::invalid_argument("resume checkpoint pattern count does not match config");
    }
    result.params = resume->params;
    result.state = resume->state;
    start_epoch = resume->epoch;
  } else {
    result.params = initial_params(shape, cfg);
    result.state = AdamState::zeros_like(result.params);
  }

  const std::size_t per_epoch = batches_per_epoch(dataset.size(), cfg);
  const std::size_t batch = per_epoch == 1 ? dataset.size() : cfg.batch_size;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t begin = b * batch;
      const std::size_t len = std::min(batch, dataset.size() - begin);
      LossGradient lg = unrolled_loss_and_gradient(result.params, dataset.subspan(begin, len), cfg);
      epoch_loss += lg.loss;
      adam_step(result.state, result.params, lg.grad, cfg);
    }
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch));
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    result.history.loss.push_back(epoch_loss);
    result.history.seconds.push_back(elapsed.count());

    double holdout = std::numeric_limits<double>::quiet_NaN();
    if (!hooks.holdout.empty() && hooks.holdout_every > 0 &&
        ((epoch + 1) % hooks.holdout_every == 0 || epoch + 1 == cfg.epochs)) {
      holdout = mean_holdout_psnr(patterns_from_params(result.params), hooks.holdout, cfg);
    }
    result.history.holdout_psnr.push_back(holdout);

    if (hooks.on_epoch) hooks.on_epoch(epoch, epoch_loss);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(TrainCheckpoint{epoch + 1, result.params, result.state});
    }
  }
  result.patterns = patterns_from_params(result.params);
  return result;
}

void write_adam_state(const std::filesystem::path& path, const AdamState& state) {
  nlohmann::json doc;
  doc["t"] = state.t;
  auto flatten = [](const std::vector<Real2D>& planes) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : planes) {
      for (double v : p) arr.push_back(v);
    }
    return arr;
  };
  doc["m"] = flatten(state.m);
  doc["v"] = flatten(state.v);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << doc.dump() << '\n';
}

AdamState read_adam_state(const std::filesystem::path& path, Shape shape, std::size_t count) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid optimizer state: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("t") || !doc["t"].is_number_integer() ||
      !doc.contains("m") || !doc.contains("v")) {
    throw FormatError("optimizer state needs fields t, m, v");
  }
  AdamState state;
  state.t = doc["t"].get<std::int64_t>();
  auto unflatten = [&](const nlohmann::json& arr, const char* name) {
    if (!arr.is_array() || arr.size() != shape.size() * count) {
      throw FormatError(std::string("optimizer state field '") + name + "' has wrong length");
    }
    std::vector<Real2D> planes;
    for (std::size_t t = 0; t < count; ++t) {
      Real2D p(shape);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = arr[t * shape.size() + i].get<double>();
      planes.push_back(std::move(p));
    }
    return planes;
  };
  state.m = unflatten(doc["m"], "m");
  state.v = unflatten(doc["v"], "v");
  return state;
}

}  // namespace cdpforge
