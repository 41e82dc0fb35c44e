#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cdpforge {

/// Seedable, splittable generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Seeds are scrambled with SplitMix64, child streams are derived
/// from the (seed, stream) key rather than from engine state, and the
/// uniform/normal transforms are implemented here instead of using the
/// implementation-defined std distributions. The result is replayable across
/// standard libraries; kAlgorithm is written into every report.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64/splitmix64-split/u53/box-muller";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent child generator; depends only on this generator's key and `stream`.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via the Box-Muller transform (second variate cached).
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace cdpforge
