#include "cdpforge/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include "cdpforge/random.hpp"
#include "json.hpp"

namespace cdpforge {

Real2D resize_bilinear(const Real2D& image, Shape target) {
  if (image.empty()) throw DataError("resize: empty image");
  Real2D out(target);
  if (image.shape() == target) return image;
  auto coord = [](std::size_t i, std::size_t in, std::size_t outn) {
    if (outn == 1) return 0.5 * static_cast<double>(in - 1);
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(outn - 1);
  };
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  for (std::size_t r = 0; r < target.height; ++r) {
    const double sy = coord(r, h, target.height);
    const auto y0 = std::min(static_cast<std::size_t>(std::floor(sy)), h - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t c = 0; c < target.width; ++c) {
      const double sx = coord(c, w, target.width);
      const auto x0 = std::min(static_cast<std::size_t>(std::floor(sx)), w - 1);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = (1.0 - fx) * image(y0, x0) + fx * image(y0, x1);
      const double bottom = (1.0 - fx) * image(y1, x0) + fx * image(y1, x1);
      out(r, c) = (1.0 - fy) * top + fy * bottom;
    }
  }
  return out;
}

Real2D center_crop(const Real2D& image, Shape window) {
  if (image.height() < window.height || image.width() < window.width) {
    throw DataError("crop window " + to_string(window) + " exceeds image " +
                    to_string(image.shape()));
  }
  const std::size_t top = (image.height() - window.height) / 2;
  const std::size_t left = (image.width() - window.width) / 2;
  Real2D out(window);
  for (std::size_t r = 0; r < window.height; ++r) {
    for (std::size_t c = 0; c < window.width; ++c) out(r, c) = image(top + r, left + c);
  }
  return out;
}

namespace {

Real2D clamp01(Real2D plane) {
  for (auto& v : plane) v = std::clamp(v, 0.0, 1.0);
  return plane;
}

}  // namespace

ImageRecord preprocess_tiny(const ImageRecord& img) {
  return {Signal::ground_truth(clamp01(resize_bilinear(img.image.plane(), {32, 32}))), img.source};
}

ImageRecord preprocess_celeba(const ImageRecord& img) {
  const Real2D cropped = center_crop(img.image.plane(), {178, 178});
  return {Signal::ground_truth(clamp01(resize_bilinear(cropped, {200, 200}))), img.source};
}

std::string_view to_string(Recipe recipe) {
  switch (recipe) {
    case Recipe::none: return "none";
    case Recipe::tiny: return "tiny";
    case Recipe::celeba: return "celeba";
  }
  return "none";
}

Recipe parse_recipe(std::string_view name) {
  if (name == "none") return Recipe::none;
  if (name == "tiny") return Recipe::tiny;
  if (name == "celeba") return Recipe::celeba;
  throw DataError("unknown preprocessing recipe '" + std::string(name) + "'");
}

ImageRecord preprocess(const ImageRecord& img, Recipe recipe) {
  switch (recipe) {
    case Recipe::none: return img;
    case Recipe::tiny: return preprocess_tiny(img);
    case Recipe::celeba: return preprocess_celeba(img);
  }
  return img;
}

std::string_view to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::blobs: return "blobs";
    case SynthKind::bars: return "bars";
    case SynthKind::random_smooth: return "random_smooth";
  }
  return "blobs";
}

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "blobs") return SynthKind::blobs;
  if (name == "bars") return SynthKind::bars;
  if (name == "random_smooth") return SynthKind::random_smooth;
  throw std::invalid_argument("unknown synthetic dataset kind '" + std::string(name) + "'");
}

namespace {

Real2D make_blobs(Shape shape, Rng& rng) {
  const double h = static_cast<double>(shape.height);
  const double w = static_cast<double>(shape.width);
  const double extent = std::min(h, w);
  Real2D out(shape, 0.0);
  const auto blobs = 2 + rng.below(5);
  for (std::uint64_t b = 0; b < blobs; ++b) {
    const double cy = rng.uniform(0.25, 0.75) * (h - 1.0);
    const double cx = rng.uniform(0.25, 0.75) * (w - 1.0);
    const double sigma = std::max(rng.uniform(0.03, 0.07) * extent, 0.5);
    const double amp = rng.uniform(0.5, 1.0);
    for (std::size_t r = 0; r < shape.height; ++r) {
      for (std::size_t c = 0; c < shape.width; ++c) {
        const double dy = static_cast<double>(r) - cy;
        const double dx = static_cast<double>(c) - cx;
        out(r, c) += amp * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
      }
    }
  }
  for (auto& v : out) v = std::min(v, 1.0);
  return out;
}

Real2D make_bars(Shape shape, Rng& rng) {
  Real2D out(shape, 0.0);
  const bool horizontal = rng.below(2) == 0;
  const std::size_t length = horizontal ? shape.height : shape.width;
  const auto bars = 1 + rng.below(3);
  for (std::uint64_t b = 0; b < bars; ++b) {
    const std::size_t thickness = std::min<std::size_t>(1 + rng.below(3), length);
    const std::size_t start = rng.below(length - thickness + 1);
    const double level = rng.uniform(0.5, 1.0);
    for (std::size_t k = start; k < start + thickness; ++k) {
      if (horizontal) {
        for (std::size_t c = 0; c < shape.width; ++c) out(k, c) = std::max(out(k, c), level);
      } else {
        for (std::size_t r = 0; r < shape.height; ++r) out(r, k) = std::max(out(r, k), level);
      }
    }
  }
  return out;
}

Real2D make_smooth(Shape shape, Rng& rng) {
  Complex2D field(shape);
  for (auto& v : field) v = {rng.normal(), 0.0};
  fft2u_inplace(field);
  const double sigma = 0.08 * static_cast<double>(std::min(shape.height, shape.width));
  auto freq = [](std::size_t k, std::size_t n) {
    const double f = static_cast<double>(k) / static_cast<double>(n);
    return f > 0.5 ? f - 1.0 : f;
  };
  for (std::size_t r = 0; r < shape.height; ++r) {
    const double fy = freq(r, shape.height);
    for (std::size_t c = 0; c < shape.width; ++c) {
      const double fx = freq(c, shape.width);
      const double gain = std::exp(-2.0 * std::numbers::pi * std::numbers::pi * sigma * sigma *
                                   (fy * fy + fx * fx));
      field(r, c) *= gain;
    }
  }
  ifft2u_inplace(field);
  Real2D out = real_part(field);
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo;
  const double span = *hi - *lo;
  for (auto& v : out) v = span > 0.0 ? std::clamp((v - min) / span, 0.0, 1.0) : 0.5;
  return out;
}

}  // namespace

std::vector<ImageRecord> synth_dataset(SynthKind kind, std::size_t count, std::size_t height,
                                       std::size_t width, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("synth_dataset: count must be >= 1");
  const Shape shape{height, width};
  const Rng root(seed, static_cast<std::uint64_t>(kind));
  std::vector<ImageRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = root.split(i);
    Real2D plane;
    switch (kind) {
      case SynthKind::blobs: plane = make_blobs(shape, rng); break;
      case SynthKind::bars: plane = make_bars(shape, rng); break;
      case SynthKind::random_smooth: plane = make_smooth(shape, rng); break;
    }
    out.push_back({Signal::ground_truth(std::move(plane)),
                   std::string(to_string(kind)) + ":" + std::to_string(seed) + ":" +
                       std::to_string(i)});
  }
  return out;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::unassigned: return "unassigned";
    case Role::train: return "train";
    case Role::test: return "test";
  }
  return "unassigned";
}

namespace {

Role parse_role(const std::string& name) {
  if (name == "unassigned") return Role::unassigned;
  if (name == "train") return Role::train;
  if (name == "test") return Role::test;
  throw DataError("unknown manifest role '" + name + "'");
}

}  // namespace

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid manifest JSON: " + std::string(e.what()));
  }
  static const std::set<std::string> known = {"name", "entries", "recipe", "seed", "n_train",
                                              "n_test"};
  if (!doc.is_object()) throw DataError("manifest must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) throw DataError("unknown manifest field '" + key + "'");
  }
  DatasetManifest m;
  try {
    m.name = doc.value("name", std::string{});
    m.recipe = parse_recipe(doc.value("recipe", std::string("none")));
    m.seed = doc.value("seed", std::uint64_t{0});
    m.n_train = doc.value("n_train", std::size_t{0});
    m.n_test = doc.value("n_test", std::size_t{0});
    if (!doc.contains("entries") || !doc["entries"].is_array()) {
      throw DataError("manifest needs an 'entries' array");
    }
    std::set<std::string> train_paths;
    std::set<std::string> test_paths;
    for (const auto& e : doc["entries"]) {
      ManifestEntry entry;
      if (e.is_string()) {
        entry.path = e.get<std::string>();
      } else {
        entry.path = e.at("path").get<std::string>();
        entry.role = parse_role(e.value("role", std::string("unassigned")));
      }
      if (entry.role == Role::train) train_paths.insert(entry.path);
      if (entry.role == Role::test) test_paths.insert(entry.path);
      m.entries.push_back(std::move(entry));
    }
    for (const auto& p : train_paths) {
      if (test_paths.contains(p)) throw DataError("'" + p + "' is listed for both train and test");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest: " + std::string(e.what()));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  nlohmann::json doc;
  doc["name"] = manifest.name;
  doc["recipe"] = std::string(to_string(manifest.recipe));
  doc["seed"] = manifest.seed;
  doc["n_train"] = manifest.n_train;
  doc["n_test"] = manifest.n_test;
  doc["entries"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    doc["entries"].push_back({{"path", e.path}, {"role", std::string(to_string(e.role))}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << '\n';
}

DatasetManifest manifest_from_directory(const std::filesystem::path& dir, std::string name) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("'" + dir.string() + "' is not a directory");
  }
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".pgm") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  DatasetManifest m;
  m.name = std::move(name);
  for (auto& p : paths) m.entries.push_back({std::move(p), Role::unassigned});
  return m;
}

SplitResult split(DatasetManifest& manifest, std::size_t n_train, std::size_t n_test,
                  std::uint64_t seed) {
  const std::size_t pool = manifest.entries.size();
  if (pool < n_train + n_test) {
    throw DataError("split needs " + std::to_string(n_train + n_test) + " images but the pool has " +
                    std::to_string(pool));
  }
  std::vector<std::size_t> order(pool);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = pool; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  SplitResult out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                  order.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());

  for (auto& e : manifest.entries) e.role = Role::unassigned;
  for (std::size_t i : out.train) manifest.entries[i].role = Role::train;
  for (std::size_t i : out.test) manifest.entries[i].role = Role::test;
  manifest.n_train = n_train;
  manifest.n_test = n_test;
  manifest.seed = seed;
  return out;
}

std::vector<ImageRecord> load_entries(const DatasetManifest& manifest,
                                      const std::vector<std::size_t>& indices,
                                      const std::filesystem::path& base) {
  std::vector<ImageRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= manifest.entries.size()) throw DataError("manifest index out of range");
    std::filesystem::path p = manifest.entries[i].path;
    if (p.is_relative()) p = base / p;
    out.push_back(preprocess(load_image(p), manifest.recipe));
  }
  return out;
}

std::vector<Signal> signals_of(const std::vector<ImageRecord>& records) {
  std::vector<Signal> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.image);
  return out;
}

}  // namespace cdpforge
