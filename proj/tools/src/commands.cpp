#include "cdpforge_cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cdpforge/bench.hpp"
#include "cdpforge/data.hpp"
#include "cdpforge/learning.hpp"
#include "cdpforge/parallel.hpp"
#include "cdpforge/pattern_io.hpp"
#include "cdpforge/random.hpp"
#include "cdpforge/version.hpp"
#include "cdpforge_cli/run_config.hpp"
#include "json.hpp"

namespace cdpforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag values; unset optionals leave the config untouched.
struct Overrides {
  std::string config;
  std::string patterns;
  std::string out;
  std::string input;
  std::string resume;
  std::string mode;
  std::optional<int> k;
  std::optional<std::size_t> t;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> noise_kind;
  std::optional<double> snr_db;
};

enum class Command { train, reconstruct, bench };

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return ss.str();
}

// Precedence: flags > config > defaults. CDP_FORGE_THREADS is consulted by
// resolve_threads() when neither flag nor config sets a thread count.
RunConfig resolve_config(const Overrides& o, Command cmd) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.patterns.empty()) cfg.bench.patterns = o.patterns;
  if (o.k) cfg.train.solver.iterations = *o.k;
  if (o.t) cfg.train.pattern_count = *o.t;
  if (o.alpha) cfg.train.solver.step_size = *o.alpha;
  if (o.seed) {
    // --seed drives the stochastic part of each command.
    if (cmd == Command::reconstruct) {
      cfg.noise.seed = *o.seed;
    } else {
      cfg.train.seed = *o.seed;
    }
  }
  if (o.threads) cfg.train.threads = *o.threads;
  if (o.noise_kind) {
    try {
      cfg.noise.kind = parse_noise_kind(*o.noise_kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--noise-kind: ") + e.what());
    }
  }
  if (o.snr_db) cfg.noise.target_snr_db = *o.snr_db;
  validate(cfg);
  return cfg;
}

json metadata(const RunConfig& cfg, const std::string& command, const std::string& timestamp,
              const std::vector<std::string>& args) {
  json j;
  j["command"] = command;
  j["argv"] = args;
  j["config"] = json::parse(to_json(cfg));
  j["seeds"] = {{"train", cfg.train.seed},
                {"solver", cfg.train.solver.seed},
                {"noise", cfg.noise.seed},
                {"data", cfg.data.seed},
                {"random_baseline", cfg.bench.random_seed}};
  j["resolved"] = {{"threads", resolve_threads(cfg.train.threads)},
                   {"step_size", altmin_step(cfg.train.solver, cfg.train.pattern_count)}};
  j["version"] = std::string(version());
  j["source_revision"] = std::string(source_revision());
  j["rng"] = std::string(Rng::kAlgorithm);
  j["timestamp"] = timestamp;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_history(const fs::path& path, const TrainHistory& h, int first_epoch) {
  bool holdout = false;
  for (double v : h.holdout_psnr) holdout = holdout || !std::isnan(v);
  std::ostringstream ss;
  ss << "epoch,loss,seconds" << (holdout ? ",holdout_psnr" : "") << '\n';
  for (std::size_t i = 0; i < h.loss.size(); ++i) {
    ss << first_epoch + static_cast<int>(i) << ',' << format_double(h.loss[i]) << ','
       << format_double(h.seconds[i]);
    if (holdout) ss << ',' << (std::isnan(h.holdout_psnr[i]) ? "" : format_double(h.holdout_psnr[i]));
    ss << '\n';
  }
  write_text(path, ss.str());
}

// Trains patterns on `train_set`, printing one JSON progress line per epoch.
TrainResult run_training(const RunConfig& cfg, std::span<const Signal> train_set,
                         std::span<const Signal> holdout, std::ostream& out,
                         const std::optional<TrainCheckpoint>& resume = std::nullopt,
                         const fs::path& checkpoint_dir = {}) {
  if (train_set.empty()) throw DataError("training set is empty");
  TrainHooks hooks;
  hooks.on_epoch = [&](int epoch, double loss) {
    out << json{{"event", "epoch"}, {"epoch", epoch}, {"loss", loss}}.dump() << '\n';
  };
  if (!checkpoint_dir.empty()) {
    hooks.on_checkpoint = [&](const TrainCheckpoint& c) {
      write_plane_stack(checkpoint_dir / "checkpoint_theta.json", to_stack(c.params));
      write_adam_state(checkpoint_dir / "checkpoint_adam.json", c.state);
      out << json{{"event", "checkpoint"}, {"epoch", c.epoch}}.dump() << '\n';
    };
  }
  if (cfg.holdout_every > 0) {
    hooks.holdout = holdout;
    hooks.holdout_every = cfg.holdout_every;
  }
  return train(train_set, cfg.train, hooks, resume);
}

std::optional<TrainCheckpoint> load_checkpoint(const fs::path& dir, const RunConfig& cfg,
                                               std::size_t dataset_size) {
  TrainCheckpoint c;
  const auto stack = read_plane_stack(dir / "checkpoint_theta.json");
  c.params = to_pattern_params(stack);
  c.state = read_adam_state(dir / "checkpoint_adam.json", c.params.shape(), c.params.count());
  c.epoch = epochs_from_steps(c.state.t, dataset_size, cfg.train);
  return c;
}

int cmd_train(const Overrides& o, const std::vector<std::string>& args, std::ostream& out) {
  const RunConfig cfg = resolve_config(o, Command::train);
  const LoadedData data = load_data(cfg.data);
  fs::create_directories(cfg.output_dir);

  std::optional<TrainCheckpoint> resume;
  if (!o.resume.empty()) resume = load_checkpoint(o.resume, cfg, data.train.size());

  const std::string stamp = utc_timestamp();
  const TrainResult r = run_training(cfg, data.train, data.test, out, resume, cfg.output_dir);

  const fs::path dir = cfg.output_dir;
  write_plane_stack(dir / "patterns_theta.json", to_stack(r.params));
  write_plane_stack(dir / "patterns_mask.json", to_stack(r.patterns));
  write_adam_state(dir / "adam_state.json", r.state);
  write_history(dir / "history.csv", r.history, resume ? resume->epoch : 0);
  json meta = metadata(cfg, "train", stamp, args);
  meta["resumed_from_epoch"] = resume ? resume->epoch : 0;
  meta["train_images"] = data.train.size();
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
  out << json{{"event", "done"}, {"output_dir", dir.string()}}.dump() << '\n';
  return kExitOk;
}

PatternSet load_patterns(const fs::path& path) {
  const PlaneStack stack = read_plane_stack(path);
  return to_pattern_set(stack);
}

bool is_image(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".PNG" || ext == ".pgm" || ext == ".PGM";
}

std::vector<fs::path> list_inputs(const fs::path& input) {
  std::vector<fs::path> paths;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input)) {
      if (e.is_regular_file() && is_image(e.path())) {
        paths.push_back(e.path());
      }
    }
    std::sort(paths.begin(), paths.end());
  } else if (fs::exists(input)) {
    paths.push_back(input);
  } else {
    throw DataError("input '" + input.string() + "' does not exist");
  }
  if (paths.empty()) throw DataError("no images under '" + input.string() + "'");
  return paths;
}

int cmd_reconstruct(const Overrides& o, const std::vector<std::string>& args, std::ostream& out) {
  const RunConfig cfg = resolve_config(o, Command::reconstruct);
  if (cfg.bench.patterns.empty()) throw ConfigError("--patterns is required");
  if (o.input.empty()) throw ConfigError("--input is required");
  PatternSet patterns;
  try {
    patterns = load_patterns(cfg.bench.patterns);
  } catch (const FormatError& e) {
    throw ConfigError(std::string("bad pattern file: ") + e.what());
  }
  const Shape shape = patterns.shape();

  // Images are ground truth (measurements are simulated, noisy if requested);
  // amplitude plane files are measurements without ground truth.
  const auto paths = list_inputs(o.input);
  struct Item {
    std::optional<Signal> truth;
    MeasurementSet meas;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    Item item;
    if (is_image(paths[i])) {
      item.truth = load_image(paths[i]).image;
      if (item.truth->shape() != shape) {
        throw DataError("'" + paths[i].string() + "' is " + to_string(item.truth->shape()) +
                        " but the patterns are " + to_string(shape));
      }
      NoiseSpec noise = cfg.noise;
      noise.seed = per_image_noise_seed(cfg.noise.seed, i);
      item.meas = add_noise(*item.truth, patterns, noise);
    } else {
      PlaneStack stack;
      try {
        stack = read_plane_stack(paths[i]);
      } catch (const FormatError& e) {
        throw DataError(e.what());
      }
      if (stack.kind != PlaneKind::amplitude) {
        throw DataError("'" + paths[i].string() + "' is not an amplitude file");
      }
      item.meas.amps = stack.planes;
      if (item.meas.count() != patterns.count() || item.meas.shape() != shape) {
        throw DataError("'" + paths[i].string() + "' does not match the pattern stack");
      }
    }
    items.push_back(std::move(item));
  }

  std::vector<SolveResult> results(items.size());
  parallel_for(items.size(), cfg.train.threads, [&](std::size_t i) {
    results[i] = solve(items[i].meas, patterns, cfg.train.solver);
  });

  fs::create_directories(cfg.output_dir);
  std::ostringstream csv;
  csv << "image_id,source,psnr_db\n";
  bool any_truth = false;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const fs::path png = cfg.output_dir / (paths[i].stem().string() + "_recon.png");
    save_png(png, results[i].estimate.plane());
    json line{{"event", "reconstructed"}, {"image_id", i}, {"output", png.string()}};
    if (items[i].truth) {
      any_truth = true;
      const double p = psnr(*items[i].truth, results[i].estimate);
      csv << i << ',' << paths[i].filename().string() << ',' << format_double(p) << '\n';
      line["psnr_db"] = p;
    }
    out << line.dump() << '\n';
  }
  if (any_truth) write_text(cfg.output_dir / "psnr.csv", csv.str());
  write_text(cfg.output_dir / "metadata.json",
             metadata(cfg, "reconstruct", utc_timestamp(), args).dump(2) + "\n");
  return kExitOk;
}

EvalOptions eval_options(const RunConfig& cfg, const std::string& dataset) {
  EvalOptions e;
  e.solver = cfg.train.solver;
  e.noise = cfg.noise;
  e.threads = cfg.train.threads;
  e.dataset = dataset;
  return e;
}

// Learned patterns for a data source: the configured pattern file, or a
// fresh training run on the source's training split.
PatternSet obtain_patterns(const RunConfig& cfg, const LoadedData& data, std::ostream& out,
                           const fs::path& save_as) {
  if (!cfg.bench.patterns.empty()) {
    try {
      return load_patterns(cfg.bench.patterns);
    } catch (const FormatError& e) {
      throw ConfigError(std::string("bad pattern file: ") + e.what());
    }
  }
  const TrainResult r = run_training(cfg, data.train, data.test, out);
  write_plane_stack(save_as, to_stack(r.params));
  return r.patterns;
}

int cmd_bench(const Overrides& o, const std::vector<std::string>& args, std::ostream& out) {
  const std::string& mode = o.mode;
  if (mode != "table1" && mode != "sweep-k" && mode != "noise" && mode != "cross") {
    throw ConfigError("unknown bench mode '" + mode + "' (expected table1, sweep-k, noise or cross)");
  }
  const RunConfig cfg = resolve_config(o, Command::bench);
  fs::create_directories(cfg.output_dir);
  const std::string stamp = utc_timestamp();
  const std::string prefix = cfg.experiment_id + "_" + mode + "_" + stamp;
  const fs::path dir = cfg.output_dir;

  BenchReport report;
  report.experiment_id = cfg.experiment_id + "/" + mode;
  std::string table;

  if (mode == "cross") {
    std::vector<DataSource> sources{cfg.data};
    sources.insert(sources.end(), cfg.bench.cross.begin(), cfg.bench.cross.end());
    std::vector<NamedPatterns> learned;
    std::vector<NamedTestset> tests;
    for (const auto& src : sources) {
      const LoadedData data = load_data(src);
      RunConfig per = cfg;
      per.bench.patterns.clear();
      learned.emplace_back(src.name,
                           obtain_patterns(per, data, out, dir / (prefix + "_" + src.name + "_theta.json")));
      tests.emplace_back(src.name, data.test);
    }
    report = cross_eval(learned, tests, eval_options(cfg, ""), cfg.bench.random_trials,
                        cfg.bench.random_seed);
    report.experiment_id = cfg.experiment_id + "/" + mode;
  } else {
    const LoadedData data = load_data(cfg.data);
    if (data.test.empty()) throw DataError("test set is empty");
    const PatternSet learned = obtain_patterns(cfg, data, out, dir / (prefix + "_theta.json"));
    if (learned.shape() != data.test.front().shape()) {
      throw DataError("pattern size " + to_string(learned.shape()) + " does not match the images " +
                      to_string(data.test.front().shape()));
    }
    EvalOptions opts = eval_options(cfg, cfg.data.name);
    if (mode == "table1") {
      opts.experiment = "table1";
      report.records = evaluate(learned, data.test, opts);
      const double l = mean_psnr(report.records);
      const RandomBaseline rb =
          random_baseline(data.test, learned.count(), cfg.bench.random_trials, opts, cfg.bench.random_seed);
      report.records.insert(report.records.end(), rb.report.records.begin(), rb.report.records.end());
      const double r = rb.trial_means[rb.best_trial];
      std::ostringstream t;
      t << "dataset,T,K,learned_mean_psnr_db,random_best_of_" << cfg.bench.random_trials
        << "_mean_psnr_db,gap_db\n"
        << cfg.data.name << ',' << learned.count() << ',' << cfg.train.solver.iterations << ','
        << format_double(l) << ',' << format_double(r) << ',' << format_double(l - r) << '\n';
      table = t.str();
    } else if (mode == "sweep-k") {
      report = sweep_k(learned, data.test, cfg.bench.k_values, opts);
    } else {
      const NoiseKind kind = cfg.noise.kind == NoiseKind::none ? NoiseKind::gaussian : cfg.noise.kind;
      report = noise_sweep(learned, data.test, kind, cfg.bench.snr_values, opts);
    }
    report.experiment_id = cfg.experiment_id + "/" + mode;
  }

  if (report.aggregates.empty()) report.aggregates = aggregate(report.records);
  const json meta = metadata(cfg, "bench " + mode, stamp, args);
  report.config_json = meta.dump();
  write_records_csv(dir / (prefix + "_records.csv"), report);
  write_aggregates_csv(dir / (prefix + "_aggregates.csv"), report);
  write_timing_csv(dir / (prefix + "_timing.csv"), report);
  write_report_json(dir / (prefix + "_report.json"), report);
  if (!table.empty()) write_text(dir / (prefix + "_table1.csv"), table);
  write_text(dir / (prefix + "_metadata.json"), meta.dump(2) + "\n");
  for (const auto& row : report.aggregates) {
    out << json{{"event", "aggregate"},
                {"experiment", row.experiment},
                {"dataset", row.dataset},
                {"pattern_source", row.pattern_source},
                {"mean_psnr_db", row.mean}}
               .dump()
        << '\n';
  }
  out << json{{"event", "done"}, {"prefix", (dir / prefix).string()}}.dump() << '\n';
  return kExitOk;
}

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON run configuration");
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--k", o.k, "Solver iterations K");
  app->add_option("--t", o.t, "Pattern count T");
  app->add_option("--alpha", o.alpha, "AltMin step size (default 4/T)");
  app->add_option("--seed", o.seed, "Training seed (noise seed for reconstruct)");
  app->add_option("--threads", o.threads, "Worker threads (fallback: $CDP_FORGE_THREADS, then all cores)");
  app->add_option("--noise-kind", o.noise_kind, "none | gaussian | poisson");
  app->add_option("--snr-db", o.snr_db, "Target SNR in dB");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cdp-forge: learned illumination patterns for coded diffraction imaging"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));
  Overrides o;

  auto* train_cmd = app.add_subcommand("train", "Learn illumination patterns");
  add_common(train_cmd, o);
  train_cmd->add_option("--resume", o.resume, "Directory holding checkpoint_theta.json and checkpoint_adam.json");

  auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct images with a pattern file");
  add_common(rec_cmd, o);
  rec_cmd->add_option("--patterns", o.patterns, "Pattern file (theta or mask)");
  rec_cmd->add_option("--input", o.input, "Image, amplitude file, or directory of them");

  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark protocol");
  add_common(bench_cmd, o);
  bench_cmd->add_option("mode", o.mode, "table1 | sweep-k | noise | cross")->required();
  bench_cmd->add_option("--patterns", o.patterns, "Use these patterns instead of training");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "cdp-forge: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(o, args, out);
    if (*rec_cmd) return cmd_reconstruct(o, args, out);
    return cmd_bench(o, args, out);
  } catch (const ConfigError& e) {
    err << "cdp-forge: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "cdp-forge: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    err << "cdp-forge: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DivergenceError& e) {
    err << "cdp-forge: diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const FormatError& e) {
    err << "cdp-forge: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "cdp-forge: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "cdp-forge: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace cdpforge::cli
