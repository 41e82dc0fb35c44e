#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cdpforge/forward_model.hpp"
#include "cdpforge/solver.hpp"

namespace cdpforge {

/// How the per-iteration phase maps are treated when backpropagating.
///  phase_detached: p = phase(F(d . x)) is a constant of each unrolled layer.
///  full: z -> z/|z| is differentiated (zero cotangent where z = 0).
enum class GradMode { phase_detached, full };

std::string_view to_string(GradMode mode);
GradMode parse_grad_mode(std::string_view name);

struct TrainConfig {
  std::size_t pattern_count = 4;
  int epochs = 500;
  double pattern_lr = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// 0 means full batch.
  std::size_t batch_size = 0;
  GradMode grad_mode = GradMode::phase_detached;
  /// theta ~ Uniform(init_lo, init_hi), i.i.d.
  double init_lo = 0.0;
  double init_hi = 1.0;
  std::uint64_t seed = 0;
  SolverConfig solver;
  /// 0 resolves via resolve_threads().
  std::size_t threads = 0;
  /// Checkpoint period in epochs; 0 disables checkpoints.
  int checkpoint_every = 50;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const TrainConfig& cfg);

/// Adam moments shaped like PatternParams, plus the step counter.
struct AdamState {
  std::vector<Real2D> m;
  std::vector<Real2D> v;
  std::int64_t t = 0;

  static AdamState zeros_like(const PatternParams& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct TrainHistory {
  std::vector<double> loss;
  std::vector<double> seconds;
  /// NaN for epochs without a held-out evaluation.
  std::vector<double> holdout_psnr;
};

using PatternGradient = std::vector<Real2D>;

/// sum_n || x_n - x_n^K(theta) ||^2 with y_n synthesized from sigmoid(theta).
double unrolled_loss(const PatternParams& params, std::span<const Signal> batch,
                     const TrainConfig& cfg);

struct LossGradient {
  double loss = 0.0;
  PatternGradient grad;
};

/// Loss and its gradient in theta, backpropagated through the K unrolled
/// AltMin layers, the measurement synthesis and the sigmoid. Per-sample
/// results are reduced in sample order, so the value does not depend on the
/// thread count. Throws DivergenceError naming the layer of a non-finite
/// cotangent.
LossGradient unrolled_loss_and_gradient(const PatternParams& params,
                                        std::span<const Signal> batch, const TrainConfig& cfg);

PatternGradient pattern_gradient(const PatternParams& params, std::span<const Signal> batch,
                                 const TrainConfig& cfg);

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, PatternParams& params, const PatternGradient& grad,
               const TrainConfig& cfg);

/// Seeded Uniform(init_lo, init_hi) initialization.
PatternParams initial_params(Shape shape, const TrainConfig& cfg);

struct TrainCheckpoint {
  int epoch = 0;
  PatternParams params;
  AdamState state;
};

struct TrainHooks {
  /// Called after every epoch with the epoch index (0-based) and its loss.
  std::function<void(int, double)> on_epoch;
  /// Called every cfg.checkpoint_every epochs with the state after that epoch.
  std::function<void(const TrainCheckpoint&)> on_checkpoint;
  /// Optional held-out images; mean PSNR is recorded every holdout_every epochs.
  std::span<const Signal> holdout;
  int holdout_every = 0;
};

struct TrainResult {
  PatternParams params;
  PatternSet patterns;
  TrainHistory history;
  AdamState state;
};

/// Learns T patterns on `dataset`. When `resume` is given, training continues
/// from that checkpoint and ends in the same state as an uninterrupted run.
TrainResult train(std::span<const Signal> dataset, const TrainConfig& cfg,
                  const TrainHooks& hooks = {},
                  const std::optional<TrainCheckpoint>& resume = std::nullopt);

/// Epoch index recorded in a checkpoint, derived from the Adam step counter.
int epochs_from_steps(std::int64_t steps, std::size_t dataset_size, const TrainConfig& cfg);

// Optimizer sidecar: {"t":int,"m":[...],"v":[...]} in the pattern-file plane layout.
void write_adam_state(const std::filesystem::path& path, const AdamState& state);
AdamState read_adam_state(const std::filesystem::path& path, Shape shape, std::size_t count);

}  // namespace cdpforge
