#include "cdpforge/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <tuple>

#include "cdpforge/parallel.hpp"
#include "cdpforge/random.hpp"
#include "json.hpp"

namespace cdpforge {

double mean_squared_error(const Real2D& a, const Real2D& b) {
  require_same_shape(a.shape(), b.shape(), "mean_squared_error");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const Signal& reference, const Signal& estimate) {
  const double mse = mean_squared_error(reference.plane(), estimate.plane());
  if (mse < kPsnrZeroMse) return kPsnrCap;
  return 10.0 * std::log10(1.0 / mse);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t per_image_noise_seed(std::uint64_t base_seed, std::size_t image_id) {
  return Rng(base_seed).split(image_id).key();
}

std::vector<BenchRecord> evaluate(const PatternSet& patterns, std::span<const Signal> testset,
                                  const EvalOptions& opts) {
  validate(opts.solver);
  std::vector<BenchRecord> records(testset.size());
  parallel_for(testset.size(), opts.threads, [&](std::size_t i) {
    const Signal& x = testset[i];
    NoiseSpec noise = opts.noise;
    noise.seed = per_image_noise_seed(opts.noise.seed, i);
    const MeasurementSet meas = add_noise(x, patterns, noise);
    const auto started = std::chrono::steady_clock::now();
    const SolveResult res = solve(meas, patterns, opts.solver);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;

    BenchRecord& r = records[i];
    r.experiment = opts.experiment;
    r.dataset = opts.dataset;
    r.image_id = i;
    r.pattern_count = patterns.count();
    r.iterations = opts.solver.iterations;
    r.noise_kind = noise.kind;
    r.snr_db = noise.kind == NoiseKind::none ? 0.0 : noise.target_snr_db;
    r.noise_seed = noise.kind == NoiseKind::none ? 0 : noise.seed;
    r.pattern_source = opts.pattern_source;
    r.pattern_seed = opts.pattern_seed;
    r.trial = opts.trial;
    r.psnr_db = psnr(x, res.estimate);
    r.seconds = elapsed.count();
  });
  return records;
}

double mean_psnr(const std::vector<BenchRecord>& records) {
  if (records.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : records) s += r.psnr_db;
  return s / static_cast<double>(records.size());
}

std::vector<AggregateRow> aggregate(const std::vector<BenchRecord>& records) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<const BenchRecord*>> groups;
  for (const auto& r : records) {
    Key key{r.experiment, r.dataset, r.pattern_source};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }

  std::vector<AggregateRow> rows;
  for (const auto& key : order) {
    const auto& group = groups[key];
    AggregateRow row;
    std::tie(row.experiment, row.dataset, row.pattern_source) = key;
    row.pattern_count = group.front()->pattern_count;
    row.iterations = group.front()->iterations;
    row.images = group.size();
    std::vector<double> values;
    double sum = 0.0;
    double seconds = 0.0;
    for (const auto* r : group) {
      values.push_back(r->psnr_db);
      sum += r->psnr_db;
      seconds += r->seconds;
    }
    const double n = static_cast<double>(values.size());
    row.mean = sum / n;
    row.mean_seconds = seconds / n;
    double var = 0.0;
    for (double v : values) var += (v - row.mean) * (v - row.mean);
    row.stddev = std::sqrt(var / n);
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    row.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    rows.push_back(std::move(row));
  }
  return rows;
}

PatternSet random_trial_patterns(std::size_t pattern_count, Shape shape, std::uint64_t seed,
                                 std::size_t trial) {
  Rng rng = Rng(seed).split(trial);
  return random_patterns(pattern_count, shape, rng);
}

RandomBaseline random_baseline(std::span<const Signal> testset, std::size_t pattern_count,
                               std::size_t trials, const EvalOptions& opts, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("random_baseline: trials must be >= 1");
  if (testset.empty()) throw std::invalid_argument("random_baseline: empty test set");
  const Shape shape = testset.front().shape();

  RandomBaseline out;
  out.report.experiment_id = opts.experiment;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t trial = 0; trial < trials; ++trial) {
    PatternSet masks = random_trial_patterns(pattern_count, shape, seed, trial);
    EvalOptions trial_opts = opts;
    trial_opts.pattern_source = "random-trial";
    trial_opts.pattern_seed = seed;
    trial_opts.trial = trial;
    trial_opts.experiment = opts.experiment + "/trial=" + std::to_string(trial);
    auto records = evaluate(masks, testset, trial_opts);
    const double m = mean_psnr(records);
    out.trial_means.push_back(m);
    if (m > best_mean) {
      best_mean = m;
      out.best_trial = trial;
      out.best = std::move(masks);
    }
    out.report.records.insert(out.report.records.end(), records.begin(), records.end());
  }
  const std::string best_label = "random-best-of-" + std::to_string(trials);
  for (auto& r : out.report.records) {
    if (r.trial == out.best_trial) r.pattern_source = best_label;
  }
  out.report.aggregates = aggregate(out.report.records);
  return out;
}

BenchReport sweep_k(const PatternSet& patterns, std::span<const Signal> testset,
                    std::span<const int> k_values, const EvalOptions& opts) {
  if (k_values.empty()) throw std::invalid_argument("sweep_k: no K values");
  BenchReport report;
  report.experiment_id = opts.experiment;
  for (int k : k_values) {
    EvalOptions o = opts;
    o.solver.iterations = k;
    o.experiment = "k=" + std::to_string(k);
    auto records = evaluate(patterns, testset, o);
    report.records.insert(report.records.end(), records.begin(), records.end());
  }
  report.aggregates = aggregate(report.records);
  return report;
}

BenchReport noise_sweep(const PatternSet& patterns, std::span<const Signal> testset, NoiseKind kind,
                        std::span<const double> snr_values, const EvalOptions& opts) {
  if (snr_values.empty()) throw std::invalid_argument("noise_sweep: no SNR values");
  BenchReport report;
  report.experiment_id = opts.experiment;
  for (double snr : snr_values) {
    EvalOptions o = opts;
    o.noise.kind = kind;
    o.noise.target_snr_db = snr;
    o.experiment = kind == NoiseKind::none ? "snr=inf" : "snr=" + format_double(snr);
    auto records = evaluate(patterns, testset, o);
    report.records.insert(report.records.end(), records.begin(), records.end());
  }
  report.aggregates = aggregate(report.records);
  return report;
}

BenchReport cross_eval(const std::vector<NamedPatterns>& patterns_by_dataset,
                       const std::vector<NamedTestset>& testsets, const EvalOptions& opts,
                       std::size_t random_trials, std::uint64_t random_seed) {
  if (patterns_by_dataset.empty() || testsets.empty()) {
    throw std::invalid_argument("cross_eval: need at least one pattern set and one test set");
  }
  BenchReport report;
  report.experiment_id = opts.experiment;
  for (const auto& [test_name, testset] : testsets) {
    for (const auto& [train_name, patterns] : patterns_by_dataset) {
      EvalOptions o = opts;
      o.dataset = test_name;
      o.experiment = "train=" + train_name;
      o.pattern_source = "learned";
      auto records = evaluate(patterns, testset, o);
      report.records.insert(report.records.end(), records.begin(), records.end());
    }
    if (random_trials > 0) {
      EvalOptions o = opts;
      o.dataset = test_name;
      o.experiment = "train=random";
      const std::size_t count = patterns_by_dataset.front().second.count();
      RandomBaseline rb = random_baseline(testset, count, random_trials, o, random_seed);
      EvalOptions best = o;
      best.pattern_source = "random-best-of-" + std::to_string(random_trials);
      best.pattern_seed = random_seed;
      best.trial = rb.best_trial;
      auto records = evaluate(rb.best, testset, best);
      report.records.insert(report.records.end(), records.begin(), records.end());
    }
  }
  report.aggregates = aggregate(report.records);
  return report;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

void write_records_csv(const std::filesystem::path& path, const BenchReport& report) {
  auto out = open_out(path);
  out << kRecordCsvHeader << '\n';
  for (const auto& r : report.records) {
    out << r.experiment << ',' << r.dataset << ',' << r.image_id << ',' << r.pattern_count << ','
        << r.iterations << ',' << to_string(r.noise_kind) << ',' << format_double(r.snr_db) << ','
        << r.noise_seed << ',' << r.pattern_source << ',' << r.pattern_seed << ',' << r.trial << ','
        << format_double(r.psnr_db) << '\n';
  }
}

void write_aggregates_csv(const std::filesystem::path& path, const BenchReport& report) {
  auto out = open_out(path);
  out << kAggregateCsvHeader << '\n';
  for (const auto& a : report.aggregates) {
    out << a.experiment << ',' << a.dataset << ',' << a.pattern_source << ',' << a.pattern_count
        << ',' << a.iterations << ',' << a.images << ',' << format_double(a.mean) << ','
        << format_double(a.median) << ',' << format_double(a.stddev) << '\n';
  }
}

void write_timing_csv(const std::filesystem::path& path, const BenchReport& report) {
  auto out = open_out(path);
  out << "experiment,dataset,image_id,pattern_source,trial,seconds\n";
  for (const auto& r : report.records) {
    out << r.experiment << ',' << r.dataset << ',' << r.image_id << ',' << r.pattern_source << ','
        << r.trial << ',' << format_double(r.seconds) << '\n';
  }
}

void write_report_json(const std::filesystem::path& path, const BenchReport& report) {
  nlohmann::json doc;
  doc["experiment_id"] = report.experiment_id;
  doc["rng"] = std::string(Rng::kAlgorithm);
  if (!report.config_json.empty()) doc["config"] = nlohmann::json::parse(report.config_json);
  doc["records"] = nlohmann::json::array();
  for (const auto& r : report.records) {
    doc["records"].push_back({{"experiment", r.experiment},
                              {"dataset", r.dataset},
                              {"image_id", r.image_id},
                              {"T", r.pattern_count},
                              {"K", r.iterations},
                              {"noise_kind", std::string(to_string(r.noise_kind))},
                              {"snr_db", r.snr_db},
                              {"noise_seed", r.noise_seed},
                              {"pattern_source", r.pattern_source},
                              {"pattern_seed", r.pattern_seed},
                              {"trial", r.trial},
                              {"psnr_db", r.psnr_db},
                              {"seconds", r.seconds}});
  }
  doc["aggregates"] = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    doc["aggregates"].push_back({{"experiment", a.experiment},
                                 {"dataset", a.dataset},
                                 {"pattern_source", a.pattern_source},
                                 {"T", a.pattern_count},
                                 {"K", a.iterations},
                                 {"images", a.images},
                                 {"mean_psnr_db", a.mean},
                                 {"median_psnr_db", a.median},
                                 {"std_psnr_db", a.stddev},
                                 {"mean_seconds", a.mean_seconds}});
  }
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

}  // namespace cdpforge
