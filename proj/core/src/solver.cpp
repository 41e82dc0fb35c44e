#include "cdpforge/solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cdpforge/metrics.hpp"

namespace cdpforge {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::altmin: return "altmin";
    case Algorithm::gs_exact: return "gs_exact";
    case Algorithm::wirtinger: return "wirtinger";
  }
  return "altmin";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "altmin") return Algorithm::altmin;
  if (name == "gs_exact") return Algorithm::gs_exact;
  if (name == "wirtinger") return Algorithm::wirtinger;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

void validate(const SolverConfig& cfg) {
  if (cfg.iterations < 0) throw std::invalid_argument("solver.iterations must be >= 0");
  if (cfg.step_size && !(*cfg.step_size > 0.0 && std::isfinite(*cfg.step_size))) {
    throw std::invalid_argument("solver.step_size must be positive");
  }
  if (cfg.wf_step && !(*cfg.wf_step > 0.0 && std::isfinite(*cfg.wf_step))) {
    throw std::invalid_argument("solver.wf_step must be positive");
  }
  if (!(cfg.wf_init_std >= 0.0)) throw std::invalid_argument("solver.wf_init_std must be >= 0");
}

double altmin_step(const SolverConfig& cfg, std::size_t pattern_count) {
  return cfg.step_size.value_or(4.0 / static_cast<double>(pattern_count));
}

double wirtinger_step(const SolverConfig& cfg, std::size_t pattern_count) {
  return cfg.wf_step.value_or(0.1 / static_cast<double>(pattern_count));
}

namespace {

void check_problem(const Shape& x, const PatternSet& patterns, const MeasurementSet& meas,
                   const char* what) {
  if (patterns.masks.empty()) throw ShapeError(std::string(what) + ": empty pattern set");
  if (patterns.count() != meas.count()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(patterns.count()) +
                     " patterns but " + std::to_string(meas.count()) + " measurement planes");
  }
  for (std::size_t t = 0; t < patterns.count(); ++t) {
    require_same_shape(x, patterns.masks[t].shape(), what);
    require_same_shape(x, meas.amps[t].shape(), what);
  }
}

void check_phases(const PatternSet& patterns, const std::vector<Complex2D>& phases,
                  const char* what) {
  if (phases.size() != patterns.count()) {
    throw ShapeError(std::string(what) + ": phase count does not match pattern count");
  }
  for (std::size_t t = 0; t < phases.size(); ++t) {
    require_same_shape(patterns.masks[t].shape(), phases[t].shape(), what);
  }
}

// z <- F(d . x)
void forward_field(const Real2D& x, const Real2D& d, Complex2D& z) {
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = {d[i] * x[i], 0.0};
  fft2u_inplace(z);
}

// acc += d . Re F*(p . y); p is taken from `phases` if given, else from z.
void accumulate_backprojection(const Real2D& d, const Real2D& y, const Complex2D& phase,
                               Complex2D& work, Real2D& acc) {
  for (std::size_t i = 0; i < work.size(); ++i) work[i] = phase[i] * y[i];
  ifft2u_inplace(work);
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d[i] * work[i].real();
}

Real2D mask_energy(const PatternSet& patterns) {
  Real2D energy(patterns.shape(), 0.0);
  for (const auto& d : patterns.masks) {
    for (std::size_t i = 0; i < d.size(); ++i) energy[i] += d[i] * d[i];
  }
  return energy;
}

void record(SolveTrace& trace, const Signal& x, const PatternSet& patterns,
            const MeasurementSet& meas, const Signal* reference) {
  trace.losses.push_back(residual_loss(x, patterns, meas));
  if (reference) trace.psnr.push_back(psnr(*reference, x));
}

void require_finite(const Real2D& x, int iteration, const char* solver) {
  if (!all_finite(x)) {
    throw DivergenceError(std::string(solver) + ": non-finite iterate at iteration " +
                          std::to_string(iteration) + " (step size too large?)");
  }
}

}  // namespace

double residual_loss(const Signal& x, const PatternSet& patterns, const MeasurementSet& meas) {
  check_problem(x.shape(), patterns, meas, "residual_loss");
  Complex2D z(x.shape());
  double total = 0.0;
  for (std::size_t t = 0; t < patterns.count(); ++t) {
    forward_field(x.plane(), patterns.masks[t], z);
    const Real2D& y = meas.amps[t];
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double r = y[i] - std::abs(z[i]);
      total += r * r;
    }
  }
  return total / static_cast<double>(patterns.count());
}

double phase_split_loss(const Signal& x, const PatternSet& patterns,
                        const std::vector<Complex2D>& phases, const MeasurementSet& meas) {
  check_problem(x.shape(), patterns, meas, "phase_split_loss");
  check_phases(patterns, phases, "phase_split_loss");
  Complex2D z(x.shape());
  double total = 0.0;
  for (std::size_t t = 0; t < patterns.count(); ++t) {
    forward_field(x.plane(), patterns.masks[t], z);
    for (std::size_t i = 0; i < z.size(); ++i) {
      total += std::norm(phases[t][i] * meas.amps[t][i] - z[i]);
    }
  }
  return total / static_cast<double>(patterns.count());
}

double intensity_loss(const Signal& x, const PatternSet& patterns, const MeasurementSet& meas) {
  check_problem(x.shape(), patterns, meas, "intensity_loss");
  Complex2D z(x.shape());
  double total = 0.0;
  for (std::size_t t = 0; t < patterns.count(); ++t) {
    forward_field(x.plane(), patterns.masks[t], z);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double y = meas.amps[t][i];
      const double r = y * y - std::norm(z[i]);
      total += r * r;
    }
  }
  return total / static_cast<double>(patterns.count());
}

Complex2D phase_estimate(const Signal& x, const Real2D& d) {
  require_same_shape(x.shape(), d.shape(), "phase_estimate");
  Complex2D z(x.shape());
  forward_field(x.plane(), d, z);
  for (auto& v : z) v = unit_phase(v);
  return z;
}

std::vector<Complex2D> phase_estimates(const Signal& x, const PatternSet& patterns) {
  std::vector<Complex2D> phases;
  phases.reserve(patterns.count());
  for (const auto& d : patterns.masks) phases.push_back(phase_estimate(x, d));
  return phases;
}

Real2D altmin_gradient(const Signal& x, const PatternSet& patterns,
                       const std::vector<Complex2D>& phases, const MeasurementSet& meas) {
  check_problem(x.shape(), patterns, meas, "altmin_gradient");
  check_phases(patterns, phases, "altmin_gradient");
  const std::size_t count = patterns.count();
  Real2D back(x.shape(), 0.0);
  Complex2D work(x.shape());
  for (std::size_t t = 0; t < count; ++t) {
    accumulate_backprojection(patterns.masks[t], meas.amps[t], phases[t], work, back);
  }
  const Real2D energy = mask_energy(patterns);
  const double scale = 2.0 / static_cast<double>(count);
  Real2D grad(x.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i] = scale * (energy[i] * x.plane()[i] - back[i]);
  }
  return grad;
}

SolveResult solve_cdp(const MeasurementSet& meas, const PatternSet& patterns,
                      const SolverConfig& cfg, const Signal* reference) {
  validate(cfg);
  const Shape shape = patterns.shape();
  check_problem(shape, patterns, meas, "solve_cdp");
  if (reference) require_same_shape(shape, reference->shape(), "solve_cdp reference");

  const std::size_t count = patterns.count();
  const double alpha = altmin_step(cfg, count);
  const double scale = 2.0 / static_cast<double>(count);
  const Real2D energy = mask_energy(patterns);

  SolveResult result{Signal::zeros(shape), {}};
  Real2D x(shape, 0.0);
  Real2D back(shape);
  Complex2D z(shape);
  for (int k = 1; k <= cfg.iterations; ++k) {
    std::fill(back.begin(), back.end(), 0.0);
    for (std::size_t t = 0; t < count; ++t) {
      const Real2D& d = patterns.masks[t];
      forward_field(x, d, z);
      const Real2D& y = meas.amps[t];
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = unit_phase(z[i]) * y[i];
      ifft2u_inplace(z);
      for (std::size_t i = 0; i < back.size(); ++i) back[i] += d[i] * z[i].real();
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] -= alpha * (scale * (energy[i] * x[i] - back[i]));
    }
    require_finite(x, k, "solve_cdp");
    if (cfg.record_trace) record(result.trace, Signal(x), patterns, meas, reference);
  }
  result.estimate = Signal(std::move(x));
  return result;
}

Signal gs_exact_step(const std::vector<Complex2D>& phases, const PatternSet& patterns,
                     const MeasurementSet& meas) {
  const Shape shape = patterns.shape();
  check_problem(shape, patterns, meas, "gs_exact_step");
  check_phases(patterns, phases, "gs_exact_step");
  const Real2D energy = mask_energy(patterns);
  Real2D back(shape, 0.0);
  Complex2D work(shape);
  for (std::size_t t = 0; t < patterns.count(); ++t) {
    accumulate_backprojection(patterns.masks[t], meas.amps[t], phases[t], work, back);
  }
  for (std::size_t i = 0; i < back.size(); ++i) {
    if (energy[i] < 1e-12) {
      throw std::invalid_argument("gs_exact_step: masks are (numerically) zero at pixel " +
                                  std::to_string(i));
    }
    back[i] /= energy[i];
  }
  return Signal(std::move(back));
}

SolveResult solve_gs(const MeasurementSet& meas, const PatternSet& patterns,
                     const SolverConfig& cfg, const Signal* reference) {
  validate(cfg);
  const Shape shape = patterns.shape();
  check_problem(shape, patterns, meas, "solve_gs");
  SolveResult result{Signal::zeros(shape), {}};
  for (int k = 1; k <= cfg.iterations; ++k) {
    Signal next = gs_exact_step(phase_estimates(result.estimate, patterns), patterns, meas);
    result.estimate = std::move(next);
    if (cfg.record_trace) record(result.trace, result.estimate, patterns, meas, reference);
  }
  return result;
}

Real2D wirtinger_gradient(const Signal& x, const PatternSet& patterns, const MeasurementSet& meas) {
  check_problem(x.shape(), patterns, meas, "wirtinger_gradient");
  const std::size_t count = patterns.count();
  Real2D grad(x.shape(), 0.0);
  Complex2D z(x.shape());
  for (std::size_t t = 0; t < count; ++t) {
    const Real2D& d = patterns.masks[t];
    forward_field(x.plane(), d, z);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double y = meas.amps[t][i];
      z[i] *= std::norm(z[i]) - y * y;
    }
    ifft2u_inplace(z);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += d[i] * z[i].real();
  }
  const double scale = 4.0 / static_cast<double>(count);
  for (auto& g : grad) g *= scale;
  return grad;
}

SolveResult solve_wf(const MeasurementSet& meas, const PatternSet& patterns,
                     const SolverConfig& cfg, const Signal* reference) {
  validate(cfg);
  const Shape shape = patterns.shape();
  check_problem(shape, patterns, meas, "solve_wf");
  const double step = wirtinger_step(cfg, patterns.count());

  Rng rng(cfg.seed);
  Real2D x(shape);
  for (auto& v : x) v = cfg.wf_init_std * rng.normal();

  SolveResult result{Signal(x), {}};
  for (int k = 1; k <= cfg.iterations; ++k) {
    const Real2D grad = wirtinger_gradient(Signal(x), patterns, meas);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= step * grad[i];
    require_finite(x, k, "solve_wf");
    if (cfg.record_trace) record(result.trace, Signal(x), patterns, meas, reference);
  }
  result.estimate = Signal(std::move(x));
  return result;
}

SolveResult solve(const MeasurementSet& meas, const PatternSet& patterns, const SolverConfig& cfg,
                  const Signal* reference) {
  switch (cfg.algorithm) {
    case Algorithm::altmin: return solve_cdp(meas, patterns, cfg, reference);
    case Algorithm::gs_exact: return solve_gs(meas, patterns, cfg, reference);
    case Algorithm::wirtinger: return solve_wf(meas, patterns, cfg, reference);
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace cdpforge
