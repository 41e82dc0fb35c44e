#include "cdpforge_cli/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cdpforge::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads fields of one JSON object and remembers which keys were consumed so
// that leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail("", "must be a JSON object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(field(key) + ": " + what);
  }

  std::string field(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    const json* v = find(key);
    if (!v) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) fail(key, "expected a boolean");
      out = v->get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
      out = v->get<T>();
    } else {
      static_assert(std::is_integral_v<T>);
      if (!v->is_number_integer()) fail(key, "expected an integer");
      out = v->get<T>();
    }
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& out) {
    const json* v = find(key);
    if (!v) return;
    if (v->is_null()) {
      out.reset();
      return;
    }
    T tmp{};
    read(key, tmp);
    out = tmp;
  }

  template <typename Parse>
  void read_enum(const std::string& key, Parse parse) {
    std::string name;
    if (!find(key)) return;
    read(key, name);
    try {
      parse(name);
    } catch (const std::invalid_argument& e) {
      fail(key, e.what());
    }
  }

  Section child(const std::string& key, bool& present) {
    const json* v = find(key);
    present = v != nullptr;
    static const json empty = json::object();
    return Section(v ? *v : empty, field(key));
  }

  void finish() const {
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.contains(key)) fail(key, "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

DataSource parse_source(const json& j, const std::string& path, const std::filesystem::path& base) {
  DataSource s;
  Section sec(j, path);
  sec.read("name", s.name);
  std::string manifest;
  sec.read("manifest", manifest);
  const bool has_synth = sec.find("synthetic") != nullptr;
  if (!manifest.empty() && has_synth) sec.fail("manifest", "give either 'manifest' or 'synthetic'");
  if (!manifest.empty()) {
    s.synthetic.reset();
    s.manifest = base.empty() ? fs::path(manifest) : base / manifest;
  } else {
    sec.read_enum("synthetic", [&](std::string_view n) { s.synthetic = parse_synth_kind(n); });
  }
  sec.read("height", s.height);
  sec.read("width", s.width);
  sec.read("n_train", s.n_train);
  sec.read("n_test", s.n_test);
  sec.read("seed", s.seed);
  sec.finish();
  if (s.height == 0 || s.width == 0) sec.fail("height", "image dimensions must be positive");
  return s;
}

json source_json(const DataSource& s) {
  json j;
  j["name"] = s.name;
  if (s.synthetic) {
    j["synthetic"] = std::string(to_string(*s.synthetic));
  } else {
    j["manifest"] = s.manifest.string();
  }
  j["height"] = s.height;
  j["width"] = s.width;
  j["n_train"] = s.n_train;
  j["n_test"] = s.n_test;
  j["seed"] = s.seed;
  return j;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  RunConfig cfg;
  Section root(doc, "");
  root.read("experiment_id", cfg.experiment_id);
  std::string out = cfg.output_dir.string();
  root.read("output_dir", out);
  cfg.output_dir = out;  // relative to the working directory, like --out
  root.read("threads", cfg.train.threads);

  bool present = false;
  if (const json* d = root.find("data")) cfg.data = parse_source(*d, "data", base_dir);

  auto pat = root.child("patterns", present);
  pat.read("count", cfg.train.pattern_count);
  {
    auto init = pat.child("init", present);
    init.read("lo", cfg.train.init_lo);
    init.read("hi", cfg.train.init_hi);
    init.finish();
  }
  pat.finish();

  auto tr = root.child("train", present);
  tr.read("epochs", cfg.train.epochs);
  tr.read("lr", cfg.train.pattern_lr);
  tr.read("beta1", cfg.train.adam_beta1);
  tr.read("beta2", cfg.train.adam_beta2);
  tr.read("eps", cfg.train.adam_eps);
  if (const json* b = tr.find("batch_size")) {
    if (b->is_string() && b->get<std::string>() == "full") {
      cfg.train.batch_size = 0;
    } else {
      tr.read("batch_size", cfg.train.batch_size);
      if (cfg.train.batch_size == 0) tr.fail("batch_size", "must be positive or \"full\"");
    }
  }
  tr.read_enum("grad_mode", [&](std::string_view n) { cfg.train.grad_mode = parse_grad_mode(n); });
  tr.read("seed", cfg.train.seed);
  tr.read("checkpoint_every", cfg.train.checkpoint_every);
  tr.read("holdout_every", cfg.holdout_every);
  tr.finish();

  auto so = root.child("solver", present);
  SolverConfig& s = cfg.train.solver;
  so.read("iterations", s.iterations);
  so.read("step_size", s.step_size);
  so.read_enum("algorithm", [&](std::string_view n) { s.algorithm = parse_algorithm(n); });
  so.read("wf_step", s.wf_step);
  so.read("wf_init_std", s.wf_init_std);
  so.read("seed", s.seed);
  so.finish();

  auto no = root.child("noise", present);
  no.read_enum("kind", [&](std::string_view n) { cfg.noise.kind = parse_noise_kind(n); });
  no.read("target_snr_db", cfg.noise.target_snr_db);
  no.read("seed", cfg.noise.seed);
  no.finish();

  auto be = root.child("bench", present);
  be.read("random_trials", cfg.bench.random_trials);
  be.read("random_seed", cfg.bench.random_seed);
  if (const json* k = be.find("k_values")) {
    if (!k->is_array()) be.fail("k_values", "expected an array of integers");
    cfg.bench.k_values.clear();
    for (const auto& v : *k) {
      if (!v.is_number_integer()) be.fail("k_values", "expected an array of integers");
      cfg.bench.k_values.push_back(v.get<int>());
    }
  }
  if (const json* k = be.find("snr_values")) {
    if (!k->is_array()) be.fail("snr_values", "expected an array of numbers");
    cfg.bench.snr_values.clear();
    for (const auto& v : *k) {
      if (!v.is_number()) be.fail("snr_values", "expected an array of numbers");
      cfg.bench.snr_values.push_back(v.get<double>());
    }
  }
  if (const json* c = be.find("cross")) {
    if (!c->is_array()) be.fail("cross", "expected an array of data sources");
    for (std::size_t i = 0; i < c->size(); ++i) {
      cfg.bench.cross.push_back(
          parse_source((*c)[i], "bench.cross[" + std::to_string(i) + "]", base_dir));
    }
  }
  std::string patterns;
  be.read("patterns", patterns);
  if (!patterns.empty()) cfg.bench.patterns = base_dir.empty() ? fs::path(patterns) : base_dir / patterns;
  be.finish();

  root.finish();
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

void validate(const RunConfig& cfg) {
  try {
    validate(cfg.train);
    validate(cfg.noise);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.experiment_id.empty()) throw ConfigError("experiment_id: must not be empty");
  for (char c : cfg.experiment_id) {
    if (c == '/' || c == '\\') throw ConfigError("experiment_id: must not contain path separators");
  }
  if (cfg.holdout_every < 0) throw ConfigError("train.holdout_every: must be >= 0");
  if (cfg.bench.random_trials == 0) throw ConfigError("bench.random_trials: must be >= 1");
  for (int k : cfg.bench.k_values) {
    if (k < 0) throw ConfigError("bench.k_values: entries must be >= 0");
  }
}

std::string to_json(const RunConfig& cfg, int indent) {
  const TrainConfig& t = cfg.train;
  const SolverConfig& s = t.solver;
  json j;
  j["experiment_id"] = cfg.experiment_id;
  j["output_dir"] = cfg.output_dir.string();
  j["threads"] = t.threads;
  j["data"] = source_json(cfg.data);
  j["patterns"] = {{"count", t.pattern_count}, {"init", {{"lo", t.init_lo}, {"hi", t.init_hi}}}};
  j["train"] = {{"epochs", t.epochs},
                {"lr", t.pattern_lr},
                {"beta1", t.adam_beta1},
                {"beta2", t.adam_beta2},
                {"eps", t.adam_eps},
                {"batch_size", t.batch_size == 0 ? json("full") : json(t.batch_size)},
                {"grad_mode", std::string(to_string(t.grad_mode))},
                {"seed", t.seed},
                {"checkpoint_every", t.checkpoint_every},
                {"holdout_every", cfg.holdout_every}};
  j["solver"] = {{"iterations", s.iterations},
                 {"step_size", optional_json(s.step_size)},
                 {"algorithm", std::string(to_string(s.algorithm))},
                 {"wf_step", optional_json(s.wf_step)},
                 {"wf_init_std", s.wf_init_std},
                 {"seed", s.seed}};
  j["noise"] = {{"kind", std::string(to_string(cfg.noise.kind))},
                {"target_snr_db", cfg.noise.target_snr_db},
                {"seed", cfg.noise.seed}};
  json cross = json::array();
  for (const auto& c : cfg.bench.cross) cross.push_back(source_json(c));
  j["bench"] = {{"random_trials", cfg.bench.random_trials},
                {"random_seed", cfg.bench.random_seed},
                {"k_values", cfg.bench.k_values},
                {"snr_values", cfg.bench.snr_values},
                {"cross", cross},
                {"patterns", cfg.bench.patterns.string()}};
  return j.dump(indent);
}

LoadedData load_data(const DataSource& source) {
  LoadedData out;
  if (source.synthetic) {
    // One seeded stream: the first n_train images train, the rest test.
    const auto all = synth_dataset(*source.synthetic, source.n_train + source.n_test, source.height,
                                   source.width, source.seed);
    const auto signals = signals_of(all);
    out.train.assign(signals.begin(), signals.begin() + static_cast<std::ptrdiff_t>(source.n_train));
    out.test.assign(signals.begin() + static_cast<std::ptrdiff_t>(source.n_train), signals.end());
    return out;
  }

  auto manifest = read_manifest(source.manifest);
  const auto base = source.manifest.parent_path();
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].role == Role::train) train_idx.push_back(i);
    if (manifest.entries[i].role == Role::test) test_idx.push_back(i);
  }
  if (train_idx.empty() && test_idx.empty()) {
    const auto s = split(manifest, source.n_train, source.n_test, source.seed);
    train_idx = s.train;
    test_idx = s.test;
  }
  out.train = signals_of(load_entries(manifest, train_idx, base));
  out.test = signals_of(load_entries(manifest, test_idx, base));
  return out;
}

}  // namespace cdpforge::cli
