#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cdpforge/forward_model.hpp"
#include "cdpforge/metrics.hpp"
#include "cdpforge/solver.hpp"

namespace cdpforge {

/// One reconstructed test image.
struct BenchRecord {
  std::string experiment;  // row label, e.g. "k=50", "snr=20", "train=blobs"
  std::string dataset;
  std::size_t image_id = 0;
  std::size_t pattern_count = 0;
  int iterations = 0;
  NoiseKind noise_kind = NoiseKind::none;
  double snr_db = 0.0;
  std::uint64_t noise_seed = 0;  // seed actually used for this image
  std::string pattern_source;    // "learned" or "random-best-of-N"
  std::uint64_t pattern_seed = 0;
  std::size_t trial = 0;
  double psnr_db = 0.0;
  double seconds = 0.0;
};

/// Summary over the records sharing (experiment, dataset, pattern_source).
struct AggregateRow {
  std::string experiment;
  std::string dataset;
  std::string pattern_source;
  std::size_t pattern_count = 0;
  int iterations = 0;
  std::size_t images = 0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // population standard deviation
  double mean_seconds = 0.0;
};

struct BenchReport {
  std::string experiment_id;
  std::vector<BenchRecord> records;
  std::vector<AggregateRow> aggregates;
  /// Free-form JSON echoed verbatim into the JSON report (may be empty).
  std::string config_json;
};

struct EvalOptions {
  SolverConfig solver;
  NoiseSpec noise;
  std::size_t threads = 0;
  std::string dataset = "test";
  std::string experiment = "eval";
  std::string pattern_source = "learned";
  std::uint64_t pattern_seed = 0;
  std::size_t trial = 0;
};

/// Noise seed used for image `image_id` under a base noise seed.
std::uint64_t per_image_noise_seed(std::uint64_t base_seed, std::size_t image_id);

/// Reconstructs every test image (measurements synthesized from it, noisy if
/// requested) and records PSNR and wall time. Records are in image order.
std::vector<BenchRecord> evaluate(const PatternSet& patterns, std::span<const Signal> testset,
                                  const EvalOptions& opts);

double mean_psnr(const std::vector<BenchRecord>& records);

/// One aggregate row per distinct (experiment, dataset, pattern_source), in
/// first-appearance order.
std::vector<AggregateRow> aggregate(const std::vector<BenchRecord>& records);

struct RandomBaseline {
  PatternSet best;
  std::size_t best_trial = 0;
  std::vector<double> trial_means;
  BenchReport report;
};

/// Draws `trials` sets of T Uniform(0,1) masks (trial i from Rng(seed).split(i)),
/// evaluates each on the test set and keeps the set with the highest mean PSNR.
RandomBaseline random_baseline(std::span<const Signal> testset, std::size_t pattern_count,
                               std::size_t trials, const EvalOptions& opts, std::uint64_t seed);

/// Masks of random-baseline trial `trial` for a master seed.
PatternSet random_trial_patterns(std::size_t pattern_count, Shape shape, std::uint64_t seed,
                                 std::size_t trial);

/// One aggregate per K, all K sharing the same measurements.
BenchReport sweep_k(const PatternSet& patterns, std::span<const Signal> testset,
                    std::span<const int> k_values, const EvalOptions& opts);

/// One aggregate per target SNR.
BenchReport noise_sweep(const PatternSet& patterns, std::span<const Signal> testset, NoiseKind kind,
                        std::span<const double> snr_values, const EvalOptions& opts);

using NamedPatterns = std::pair<std::string, PatternSet>;
using NamedTestset = std::pair<std::string, std::vector<Signal>>;

/// Train-dataset x test-dataset PSNR matrix (experiment = "train=<name>"),
/// plus a random best-of-`trials` column per test set (experiment = "train=random").
BenchReport cross_eval(const std::vector<NamedPatterns>& patterns_by_dataset,
                       const std::vector<NamedTestset>& testsets, const EvalOptions& opts,
                       std::size_t random_trials, std::uint64_t random_seed);

// Per-record CSV (deterministic: no timing column), aggregate CSV, timing CSV
// and a full JSON report.
inline constexpr const char* kRecordCsvHeader =
    "experiment,dataset,image_id,T,K,noise_kind,snr_db,noise_seed,pattern_source,pattern_seed,"
    "trial,psnr_db";
inline constexpr const char* kAggregateCsvHeader =
    "experiment,dataset,pattern_source,T,K,images,mean_psnr_db,median_psnr_db,std_psnr_db";

void write_records_csv(const std::filesystem::path& path, const BenchReport& report);
void write_aggregates_csv(const std::filesystem::path& path, const BenchReport& report);
void write_timing_csv(const std::filesystem::path& path, const BenchReport& report);
void write_report_json(const std::filesystem::path& path, const BenchReport& report);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace cdpforge
