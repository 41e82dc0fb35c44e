#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cdpforge/forward_model.hpp"

namespace cdpforge {

enum class Algorithm { altmin, gs_exact, wirtinger };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

struct SolverConfig {
  int iterations = 50;
  /// AltMin step size alpha in x <- x - alpha * altmin_gradient(...). Unset
  /// means 4/T.
  std::optional<double> step_size;
  Algorithm algorithm = Algorithm::altmin;
  bool record_trace = false;
  /// Wirtinger-flow step size; unset means 0.1/T.
  std::optional<double> wf_step;
  /// Standard deviation of the Wirtinger-flow starting point (zero is stationary).
  double wf_init_std = 0.1;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const SolverConfig& cfg);
double altmin_step(const SolverConfig& cfg, std::size_t pattern_count);
double wirtinger_step(const SolverConfig& cfg, std::size_t pattern_count);

struct SolveTrace {
  /// Amplitude residual after each iteration.
  std::vector<double> losses;
  /// PSNR of each iterate against the reference, when one was supplied.
  std::vector<double> psnr;
};

struct SolveResult {
  Signal estimate;
  SolveTrace trace;
};

/// (1/T) sum_t || y_t - |F(d_t . x)| ||^2
double residual_loss(const Signal& x, const PatternSet& patterns, const MeasurementSet& meas);

/// (1/T) sum_t || p_t . y_t - F(d_t . x) ||^2 with the phases held fixed.
double phase_split_loss(const Signal& x, const PatternSet& patterns,
                        const std::vector<Complex2D>& phases, const MeasurementSet& meas);

/// (1/T) sum_t || y_t^2 - |F(d_t . x)|^2 ||^2
double intensity_loss(const Signal& x, const PatternSet& patterns, const MeasurementSet& meas);

/// phase(F(d . x)) with phase(0) = 1.
Complex2D phase_estimate(const Signal& x, const Real2D& d);
std::vector<Complex2D> phase_estimates(const Signal& x, const PatternSet& patterns);

/// Gradient of phase_split_loss in x for real x:
///   (2/T) sum_t [ d_t^2 . x - d_t . Re F*(p_t . y_t) ]
Real2D altmin_gradient(const Signal& x, const PatternSet& patterns,
                       const std::vector<Complex2D>& phases, const MeasurementSet& meas);

/// K AltMin iterations from x = 0 with a fixed step. `reference` (optional)
/// feeds the PSNR trace. Throws DivergenceError naming the iteration at which
/// an iterate stopped being finite.
SolveResult solve_cdp(const MeasurementSet& meas, const PatternSet& patterns,
                      const SolverConfig& cfg, const Signal* reference = nullptr);

/// Exact least-squares minimizer of phase_split_loss for fixed phases:
///   x = Re(sum_t d_t . F*(p_t . y_t)) / sum_t d_t^2
Signal gs_exact_step(const std::vector<Complex2D>& phases, const PatternSet& patterns,
                     const MeasurementSet& meas);
SolveResult solve_gs(const MeasurementSet& meas, const PatternSet& patterns,
                     const SolverConfig& cfg, const Signal* reference = nullptr);

/// Gradient of intensity_loss:
///   (4/T) sum_t Re(d_t . F*((|z_t|^2 - y_t^2) . z_t)),  z_t = F(d_t . x)
Real2D wirtinger_gradient(const Signal& x, const PatternSet& patterns, const MeasurementSet& meas);
SolveResult solve_wf(const MeasurementSet& meas, const PatternSet& patterns,
                     const SolverConfig& cfg, const Signal* reference = nullptr);

/// Dispatches on cfg.algorithm.
SolveResult solve(const MeasurementSet& meas, const PatternSet& patterns, const SolverConfig& cfg,
                  const Signal* reference = nullptr);

}  // namespace cdpforge
