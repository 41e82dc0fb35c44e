#pragma once

// Independent reference computations for the unit tests. Nothing in here
// calls into the library's transform or solver code.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "cdpforge/forward_model.hpp"
#include "cdpforge/random.hpp"

namespace oracle {

using cdpforge::Complex2D;
using cdpforge::Real2D;
using cplx = std::complex<double>;

// O(n^2) unitary 2D DFT, summed straight from the definition.
inline Complex2D dft2(const Complex2D& a, bool inverse = false) {
  const std::size_t h = a.height();
  const std::size_t w = a.width();
  const double sign = inverse ? 1.0 : -1.0;
  Complex2D out(h, w);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      cplx acc = 0.0;
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          const double angle = sign * 2.0 * std::numbers::pi *
                               (static_cast<double>(u * r) / static_cast<double>(h) +
                                static_cast<double>(v * c) / static_cast<double>(w));
          acc += a(r, c) * std::polar(1.0, angle);
        }
      }
      out(u, v) = acc / std::sqrt(static_cast<double>(h * w));
    }
  }
  return out;
}

inline Complex2D lift(const Real2D& a) {
  Complex2D out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i];
  return out;
}

// |DFT(d . x)| per mask, via the brute-force transform.
inline std::vector<Real2D> magnitudes(const Real2D& x, const std::vector<Real2D>& masks) {
  std::vector<Real2D> out;
  for (const auto& d : masks) {
    Complex2D field(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) field[i] = d[i] * x[i];
    const Complex2D z = dft2(field);
    Real2D y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::abs(z[i]);
    out.push_back(std::move(y));
  }
  return out;
}

inline Real2D uniform_plane(cdpforge::Shape shape, cdpforge::Rng& rng, double lo = 0.0,
                            double hi = 1.0) {
  Real2D out(shape);
  for (auto& v : out) v = rng.uniform(lo, hi);
  return out;
}

inline Complex2D complex_plane(cdpforge::Shape shape, cdpforge::Rng& rng) {
  Complex2D out(shape);
  for (auto& v : out) v = {rng.normal(), rng.normal()};
  return out;
}

inline double max_abs_diff(const Complex2D& a, const Complex2D& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const Real2D& a, const Real2D& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double norm(const Real2D& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

// Relative error between two stacked gradients, ||a - b|| / max(||a||, ||b||, tiny).
inline double rel_error(const std::vector<Real2D>& a, const std::vector<Real2D>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].size(); ++i) {
      diff += (a[t][i] - b[t][i]) * (a[t][i] - b[t][i]);
      na += a[t][i] * a[t][i];
      nb += b[t][i] * b[t][i];
    }
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

// Central differences of f over every entry of every plane of `point`.
template <typename F>
std::vector<Real2D> central_difference(std::vector<Real2D> point, F&& f, double h) {
  std::vector<Real2D> grad;
  for (std::size_t t = 0; t < point.size(); ++t) {
    Real2D g(point[t].shape());
    for (std::size_t i = 0; i < point[t].size(); ++i) {
      const double keep = point[t][i];
      point[t][i] = keep + h;
      const double up = f(point);
      point[t][i] = keep - h;
      const double down = f(point);
      point[t][i] = keep;
      g[i] = (up - down) / (2.0 * h);
    }
    grad.push_back(std::move(g));
  }
  return grad;
}

}  // namespace oracle
