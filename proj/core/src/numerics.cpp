#include "cdpforge/numerics.hpp"
#include "cdpforge/version.hpp"

#include <cmath>

namespace cdpforge {

std::string to_string(const Shape& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width);
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " +
                     to_string(b));
  }
}

Complex2D cmul(const Complex2D& a, const Complex2D& b) {
  require_same_shape(a.shape(), b.shape(), "cmul");
  Complex2D out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Complex2D cconj(const Complex2D& a) {
  Complex2D out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::conj(a[i]);
  return out;
}

Real2D cabs(const Complex2D& a) {
  Real2D out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::abs(a[i]);
  return out;
}

Complex2D cphase(const Complex2D& a) {
  Complex2D out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = unit_phase(a[i]);
  return out;
}

Complex2D to_complex(const Real2D& a) {
  Complex2D out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = {a[i], 0.0};
  return out;
}

Real2D real_part(const Complex2D& a) {
  Real2D out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i].real();
  return out;
}

Real2D hadamard(const Real2D& a, const Real2D& b) {
  require_same_shape(a.shape(), b.shape(), "hadamard");
  Real2D out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double squared_norm(const Real2D& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double squared_norm(const Complex2D& a) {
  double s = 0.0;
  for (const auto& v : a) s += std::norm(v);
  return s;
}

std::complex<double> inner(const Complex2D& a, const Complex2D& b) {
  require_same_shape(a.shape(), b.shape(), "inner");
  std::complex<double> s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

bool all_finite(const Real2D& a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool all_finite(const Complex2D& a) {
  for (const auto& v : a) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

std::string_view version() { return CDPFORGE_VERSION; }
std::string_view source_revision() { return CDPFORGE_GIT_DESCRIBE; }

}  // namespace cdpforge
