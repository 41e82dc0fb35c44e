#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "cdpforge/numerics.hpp"
#include "cdpforge/random.hpp"

namespace cdpforge {

/// A real image plane. Ground truth lives in [0,1]; estimates are unconstrained.
class Signal {
 public:
  Signal() = default;
  /// Rejects non-finite entries.
  explicit Signal(Real2D plane);
  /// Rejects entries outside [0,1].
  static Signal ground_truth(Real2D plane);
  static Signal zeros(Shape shape) { return Signal(Real2D(shape, 0.0)); }

  const Real2D& plane() const { return plane_; }
  const Shape& shape() const { return plane_.shape(); }

 private:
  Real2D plane_;
};

/// Unconstrained pattern parameters, one plane per illumination pattern.
struct PatternParams {
  std::vector<Real2D> thetas;

  std::size_t count() const { return thetas.size(); }
  Shape shape() const { return thetas.empty() ? Shape{} : thetas.front().shape(); }
};

/// Illumination masks d_t with entries in [0,1].
struct PatternSet {
  std::vector<Real2D> masks;

  std::size_t count() const { return masks.size(); }
  Shape shape() const { return masks.empty() ? Shape{} : masks.front().shape(); }
};

/// Nonnegative Fourier-magnitude measurements y_t, one plane per pattern.
struct MeasurementSet {
  std::vector<Real2D> amps;

  std::size_t count() const { return amps.size(); }
  Shape shape() const { return amps.empty() ? Shape{} : amps.front().shape(); }
};

enum class NoiseKind { none, gaussian, poisson };

std::string_view to_string(NoiseKind kind);
/// Throws std::invalid_argument for unknown names.
NoiseKind parse_noise_kind(std::string_view name);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double target_snr_db = 0.0;
  std::uint64_t seed = 0;
};

// Shape checks; each throws ShapeError (or std::invalid_argument for bad values).
void validate(const PatternParams& params);
void validate(const PatternSet& patterns);
void validate(const MeasurementSet& meas);
void validate(const NoiseSpec& spec);

/// Logistic function, saturating strictly inside (0,1): the result never
/// rounds to exactly 0 or 1.
inline double sigmoid(double v) {
  if (v >= 0.0) return std::min(1.0 / (1.0 + std::exp(-v)), 1.0 - 0x1.0p-53);
  const double e = std::exp(v);
  return std::max(e / (1.0 + e), std::numeric_limits<double>::min());
}

/// d_t = sigmoid(theta_t) elementwise.
PatternSet patterns_from_params(const PatternParams& params);

/// T masks drawn i.i.d. Uniform(0,1).
PatternSet random_patterns(std::size_t count, Shape shape, Rng& rng);

/// Complex fields z_t = F(d_t . x) before the modulus is taken.
std::vector<Complex2D> diffraction_fields(const Signal& x, const PatternSet& patterns);

/// y_t = |F(d_t . x)| for every pattern.
MeasurementSet measure(const Signal& x, const PatternSet& patterns);

/// Variance parameter that realizes the target SNR on the given clean
/// magnitudes: sigma^2 for Gaussian noise, lambda for the Poisson surrogate.
/// SNR(dB) = 10 log10(sum |z|^2 / E[sum eta^2]) over every entry of every plane.
double noise_parameter(const MeasurementSet& clean, NoiseKind kind, double target_snr_db);

/// The noise eta that perturb() adds before clamping (all zeros for kind none).
std::vector<Real2D> draw_noise(const MeasurementSet& clean, const NoiseSpec& spec);

/// Adds noise to clean magnitudes and clamps at zero. kind == none returns
/// `clean` unchanged.
MeasurementSet perturb(const MeasurementSet& clean, const NoiseSpec& spec);

/// measure() followed by perturb().
MeasurementSet add_noise(const Signal& x, const PatternSet& patterns, const NoiseSpec& spec);

}  // namespace cdpforge
