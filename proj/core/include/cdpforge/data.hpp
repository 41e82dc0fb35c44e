#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cdpforge/forward_model.hpp"

namespace cdpforge {

/// Unreadable, malformed or incompatible input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImageRecord {
  Signal image;  // entries in [0,1]
  std::string source;
};

// 8-bit images only. PNG (gray, gray+alpha, RGB, RGBA, palette) and binary
// PGM (P5). Color is reduced with BT.601 luma weights 0.299/0.587/0.114;
// alpha is ignored; value v maps to v/255.
ImageRecord load_image(const std::filesystem::path& path);
/// Writes an 8-bit grayscale PNG; values are clamped to [0,1] and rounded.
void save_png(const std::filesystem::path& path, const Real2D& image);
void save_pgm(const std::filesystem::path& path, const Real2D& image);

/// Bilinear resize with corner-aligned sampling: output (i, j) samples the
/// input at (i (H-1)/(h-1), j (W-1)/(w-1)); a length-1 axis samples the centre.
Real2D resize_bilinear(const Real2D& image, Shape target);
/// Centred crop; throws DataError when the input is smaller than the window.
Real2D center_crop(const Real2D& image, Shape window);

/// Tiny-image recipe: resize to 32x32 (no-op when already 32x32), clamp to [0,1].
ImageRecord preprocess_tiny(const ImageRecord& img);
/// Face recipe: centre-crop 178x178, resize to 200x200, clamp to [0,1].
ImageRecord preprocess_celeba(const ImageRecord& img);

enum class Recipe { none, tiny, celeba };
std::string_view to_string(Recipe recipe);
Recipe parse_recipe(std::string_view name);
ImageRecord preprocess(const ImageRecord& img, Recipe recipe);

enum class SynthKind { blobs, bars, random_smooth };
std::string_view to_string(SynthKind kind);
SynthKind parse_synth_kind(std::string_view name);

// Deterministic synthetic images in [0,1]; image i depends only on (seed, i).
//  blobs:         2-6 isotropic Gaussian bumps on a zero background
//  bars:          1-3 axis-aligned bars (all horizontal or all vertical)
//  random_smooth: Gaussian low-pass filtered white noise, min-max normalised
std::vector<ImageRecord> synth_dataset(SynthKind kind, std::size_t count, std::size_t height,
                                       std::size_t width, std::uint64_t seed);

enum class Role { unassigned, train, test };
std::string_view to_string(Role role);

struct ManifestEntry {
  std::string path;
  Role role = Role::unassigned;
};

struct DatasetManifest {
  std::string name;
  std::vector<ManifestEntry> entries;
  Recipe recipe = Recipe::none;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

/// Throws DataError on JSON or schema problems, or overlapping train/test roles.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
/// Manifest listing every PNG/PGM file under `dir` in sorted path order.
DatasetManifest manifest_from_directory(const std::filesystem::path& dir, std::string name);

struct SplitResult {
  std::vector<std::size_t> train;  // indices into manifest.entries, ascending
  std::vector<std::size_t> test;
};

/// Seeded disjoint train/test selection. Records roles, counts and the seed
/// in `manifest`. Throws DataError when the pool is too small.
SplitResult split(DatasetManifest& manifest, std::size_t n_train, std::size_t n_test,
                  std::uint64_t seed);

/// Loads and preprocesses the listed entries. Relative paths resolve against `base`.
std::vector<ImageRecord> load_entries(const DatasetManifest& manifest,
                                      const std::vector<std::size_t>& indices,
                                      const std::filesystem::path& base);

std::vector<Signal> signals_of(const std::vector<ImageRecord>& records);

}  // namespace cdpforge
