#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "cdpforge/data.hpp"

namespace cdpforge {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

Real2D load_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open '" + path.string() + "'");

  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw DataError("'" + path.string() + "' is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng initialisation failed");
  }
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth != 8 && !(color == PNG_COLOR_TYPE_PALETTE && depth <= 8)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unsupported PNG bit depth " + std::to_string(depth) + " in '" +
                    path.string() + "' (8-bit only)");
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  png_read_update_info(png, info);
  const std::size_t channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);

  pixels.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = pixels.data() + r * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Real2D out(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const png_byte* px = rows[r] + c * channels;
      double v = 0.0;
      if (channels <= 2) {
        v = px[0] / 255.0;
      } else {
        v = luma(px[0] / 255.0, px[1] / 255.0, px[2] / 255.0);
      }
      out(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

// Skips whitespace and '#' comments in a PNM header.
bool next_token(std::istream& in, std::string& token) {
  token.clear();
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  while (ch != EOF && !std::isspace(ch)) {
    token.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  return !token.empty();
}

Real2D load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string magic, w, h, maxval;
  if (!next_token(in, magic) || magic != "P5") {
    throw DataError("'" + path.string() + "' is not a binary PGM (P5)");
  }
  if (!next_token(in, w) || !next_token(in, h) || !next_token(in, maxval)) {
    throw DataError("truncated PGM header in '" + path.string() + "'");
  }
  std::size_t width = 0, height = 0;
  int max = 0;
  try {
    width = std::stoul(w);
    height = std::stoul(h);
    max = std::stoi(maxval);
  } catch (const std::exception&) {
    throw DataError("malformed PGM header in '" + path.string() + "'");
  }
  if (max != 255) {
    throw DataError("unsupported PGM maxval " + std::to_string(max) + " in '" + path.string() +
                    "' (8-bit only)");
  }
  if (width == 0 || height == 0) throw DataError("empty PGM '" + path.string() + "'");
  std::vector<unsigned char> buf(width * height);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw DataError("truncated PGM data in '" + path.string() + "'");
  }
  Real2D out(height, width);
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i] / 255.0;
  return out;
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

ImageRecord load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("no such file '" + path.string() + "'");
  std::ifstream probe(path, std::ios::binary);
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  probe.close();
  Real2D plane = (magic[0] == 'P' && magic[1] == '5') ? load_pgm(path) : load_png(path);
  return ImageRecord{Signal::ground_truth(std::move(plane)), path.string()};
}

void save_png(const std::filesystem::path& path, const Real2D& image) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng initialisation failed");
  }
  std::vector<png_byte> pixels(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) pixels[i] = to_byte(image[i]);
  std::vector<png_bytep> rows(image.height());
  for (std::size_t r = 0; r < image.height(); ++r) rows[r] = pixels.data() + r * image.width();

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_pgm(const std::filesystem::path& path, const Real2D& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  for (double v : image) out.put(static_cast<char>(to_byte(v)));
}

}  // namespace cdpforge
