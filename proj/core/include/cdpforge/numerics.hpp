#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdpforge {

/// Thrown when two arrays that must agree in shape do not. Always a caller bug.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterate or cotangent stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

/// Row-major H x W plane. Default construction yields an empty placeholder;
/// every sized constructor requires H >= 1 and W >= 1.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(std::size_t height, std::size_t width, T fill = T{})
      : shape_{height, width}, data_(checked_size(height, width), fill) {}
  explicit Grid(Shape shape, T fill = T{}) : Grid(shape.height, shape.width, fill) {}
  Grid(std::size_t height, std::size_t width, std::vector<T> values)
      : shape_{height, width}, data_(std::move(values)) {
    if (data_.size() != checked_size(height, width)) {
      throw ShapeError("grid data length " + std::to_string(data_.size()) +
                       " does not match " + to_string(shape_));
    }
  }

  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  const Shape& shape() const { return shape_; }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t row, std::size_t col) { return data_[row * shape_.width + col]; }
  const T& operator()(std::size_t row, std::size_t col) const {
    return data_[row * shape_.width + col];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_size(std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) {
      throw ShapeError("grid dimensions must be positive, got " + std::to_string(height) + "x" +
                       std::to_string(width));
    }
    return height * width;
  }

  Shape shape_{};
  std::vector<T> data_;
};

using Real2D = Grid<double>;
using Complex2D = Grid<std::complex<double>>;

void require_same_shape(const Shape& a, const Shape& b, const char* what);

// Unitary 2D DFT pair (scaled by 1/sqrt(H*W) in both directions), so that
// ifft2u is both the inverse and the adjoint of fft2u. Power-of-two axes use
// radix-2 passes; other lengths fall back to a direct DFT along that axis.
Complex2D fft2u(const Complex2D& a);
Complex2D ifft2u(const Complex2D& a);
void fft2u_inplace(Complex2D& a);
void ifft2u_inplace(Complex2D& a);

Complex2D cmul(const Complex2D& a, const Complex2D& b);
Complex2D cconj(const Complex2D& a);
Real2D cabs(const Complex2D& a);

/// z/|z| entrywise, with the convention phase(0) = 1.
Complex2D cphase(const Complex2D& a);
inline std::complex<double> unit_phase(std::complex<double> z) {
  const double r = std::sqrt(z.real() * z.real() + z.imag() * z.imag());
  return r > 0.0 ? z / r : std::complex<double>(1.0, 0.0);
}

Complex2D to_complex(const Real2D& a);
Real2D real_part(const Complex2D& a);

/// Elementwise product of real planes.
Real2D hadamard(const Real2D& a, const Real2D& b);

double squared_norm(const Real2D& a);
double squared_norm(const Complex2D& a);
/// <a, b> = sum conj(a_i) b_i
std::complex<double> inner(const Complex2D& a, const Complex2D& b);

bool all_finite(const Real2D& a);
bool all_finite(const Complex2D& a);

}  // namespace cdpforge
