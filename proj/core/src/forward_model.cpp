#include "cdpforge/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdpforge {

Signal::Signal(Real2D plane) : plane_(std::move(plane)) {
  if (!all_finite(plane_)) throw std::invalid_argument("signal contains non-finite entries");
}

Signal Signal::ground_truth(Real2D plane) {
  for (double v : plane) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("ground-truth signal entries must lie in [0,1], found " +
                                  std::to_string(v));
    }
  }
  return Signal(std::move(plane));
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::poisson: return "poisson";
  }
  return "none";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "none") return NoiseKind::none;
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "poisson") return NoiseKind::poisson;
  throw std::invalid_argument("unknown noise kind '" + std::string(name) + "'");
}

namespace {

void validate_stack(const std::vector<Real2D>& planes, const char* what) {
  if (planes.empty()) throw ShapeError(std::string(what) + ": need at least one plane");
  for (const auto& p : planes) {
    if (p.empty()) throw ShapeError(std::string(what) + ": empty plane");
    require_same_shape(planes.front().shape(), p.shape(), what);
  }
}

}  // namespace

void validate(const PatternParams& params) {
  validate_stack(params.thetas, "pattern parameters");
}

void validate(const PatternSet& patterns) {
  validate_stack(patterns.masks, "pattern set");
  for (const auto& m : patterns.masks) {
    for (double v : m) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("pattern entries must lie in [0,1], found " +
                                    std::to_string(v));
      }
    }
  }
}

void validate(const MeasurementSet& meas) {
  validate_stack(meas.amps, "measurement set");
}

void validate(const NoiseSpec& spec) {
  if (spec.kind != NoiseKind::none && !std::isfinite(spec.target_snr_db)) {
    throw std::invalid_argument("noise target_snr_db must be finite");
  }
}

PatternSet patterns_from_params(const PatternParams& params) {
  validate(params);
  PatternSet out;
  out.masks.reserve(params.count());
  for (const auto& theta : params.thetas) {
    Real2D d(theta.shape());
    for (std::size_t i = 0; i < theta.size(); ++i) d[i] = sigmoid(theta[i]);
    out.masks.push_back(std::move(d));
  }
  return out;
}

PatternSet random_patterns(std::size_t count, Shape shape, Rng& rng) {
  PatternSet out;
  out.masks.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    Real2D d(shape);
    for (auto& v : d) v = rng.uniform();
    out.masks.push_back(std::move(d));
  }
  return out;
}

std::vector<Complex2D> diffraction_fields(const Signal& x, const PatternSet& patterns) {
  if (patterns.masks.empty()) throw ShapeError("measure: empty pattern set");
  std::vector<Complex2D> fields;
  fields.reserve(patterns.count());
  for (const auto& d : patterns.masks) {
    require_same_shape(x.shape(), d.shape(), "measure");
    Complex2D z(d.shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = {d[i] * x.plane()[i], 0.0};
    fft2u_inplace(z);
    fields.push_back(std::move(z));
  }
  return fields;
}

MeasurementSet measure(const Signal& x, const PatternSet& patterns) {
  MeasurementSet out;
  for (const auto& z : diffraction_fields(x, patterns)) out.amps.push_back(cabs(z));
  return out;
}

double noise_parameter(const MeasurementSet& clean, NoiseKind kind, double target_snr_db) {
  double energy = 0.0;
  double mass = 0.0;
  std::size_t entries = 0;
  for (const auto& y : clean.amps) {
    for (double v : y) {
      energy += v * v;
      mass += v;
    }
    entries += y.size();
  }
  const double ratio = std::pow(10.0, target_snr_db / 10.0);
  switch (kind) {
    case NoiseKind::none: return 0.0;
    case NoiseKind::gaussian: return entries == 0 ? 0.0 : energy / (static_cast<double>(entries) * ratio);
    case NoiseKind::poisson: return mass > 0.0 ? energy / (mass * ratio) : 0.0;
  }
  return 0.0;
}

std::vector<Real2D> draw_noise(const MeasurementSet& clean, const NoiseSpec& spec) {
  validate(spec);
  std::vector<Real2D> eta;
  eta.reserve(clean.count());
  if (spec.kind == NoiseKind::none) {
    for (const auto& y : clean.amps) eta.emplace_back(y.shape(), 0.0);
    return eta;
  }
  const double param = noise_parameter(clean, spec.kind, spec.target_snr_db);
  Rng rng(spec.seed);
  for (const auto& y : clean.amps) {
    Real2D e(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double variance = spec.kind == NoiseKind::gaussian ? param : param * y[i];
      e[i] = std::sqrt(variance) * rng.normal();
    }
    eta.push_back(std::move(e));
  }
  return eta;
}

MeasurementSet perturb(const MeasurementSet& clean, const NoiseSpec& spec) {
  validate(spec);
  if (spec.kind == NoiseKind::none) return clean;
  const auto eta = draw_noise(clean, spec);
  MeasurementSet out = clean;
  for (std::size_t t = 0; t < out.count(); ++t) {
    for (std::size_t i = 0; i < out.amps[t].size(); ++i) {
      out.amps[t][i] = std::max(0.0, out.amps[t][i] + eta[t][i]);
    }
  }
  return out;
}

MeasurementSet add_noise(const Signal& x, const PatternSet& patterns, const NoiseSpec& spec) {
  return perturb(measure(x, patterns), spec);
}

}  // namespace cdpforge
