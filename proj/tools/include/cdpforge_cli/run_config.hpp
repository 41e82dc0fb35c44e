#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdpforge/data.hpp"
#include "cdpforge/forward_model.hpp"
#include "cdpforge/learning.hpp"

namespace cdpforge::cli {

/// Invalid configuration or command line (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Where images come from: a synthetic generator or a manifest on disk.
struct DataSource {
  std::string name = "synthetic";
  std::optional<SynthKind> synthetic = SynthKind::blobs;
  std::filesystem::path manifest;  // used when synthetic is empty
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t n_train = 32;
  std::size_t n_test = 100;
  std::uint64_t seed = 0;
};

struct BenchSettings {
  std::size_t random_trials = 30;
  std::uint64_t random_seed = 1;
  std::vector<int> k_values{10, 25, 50, 100, 200};
  std::vector<double> snr_values{40.0, 30.0, 20.0, 10.0};
  /// Extra datasets for the cross-generalization matrix (the main dataset is first).
  std::vector<DataSource> cross;
  /// Pre-trained theta or mask file; patterns are trained when empty.
  std::filesystem::path patterns;
};

/// Merged view of everything a run needs. Every field has a default, so "{}"
/// is a valid config.
struct RunConfig {
  std::string experiment_id = "run";
  std::filesystem::path output_dir = "cdp-forge-out";
  DataSource data;
  TrainConfig train;
  NoiseSpec noise;
  BenchSettings bench;
  int holdout_every = 0;
};

/// Strict parse: unknown keys, wrong types and invalid values raise
/// ConfigError naming the offending field. Relative paths are resolved
/// against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Re-validates after flag overrides.
void validate(const RunConfig& cfg);

/// Fully resolved config (all defaults explicit). Parsing the result yields
/// an equal configuration.
std::string to_json(const RunConfig& cfg, int indent = 2);

struct LoadedData {
  std::vector<Signal> train;
  std::vector<Signal> test;
};

/// Throws DataError when the source cannot be read.
LoadedData load_data(const DataSource& source);

}  // namespace cdpforge::cli
