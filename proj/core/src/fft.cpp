#include <cmath>
#include <memory>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "cdpforge/numerics.hpp"

namespace cdpforge {
namespace {

using cplx = std::complex<double>;

// Plain complex product; std::complex operator* goes through the Annex G
// NaN/Inf recovery path, which dominates the transform cost.
inline cplx mul(cplx a, cplx b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

// Tables for one transform length: forward and inverse twiddles, and the
// bit-reversal permutation when the length is a power of two.
struct Plan1d {
  explicit Plan1d(std::size_t length) : n(length), pow2((length & (length - 1)) == 0) {
    const std::size_t table = pow2 ? std::max<std::size_t>(n / 2, 1) : n;
    forward.resize(table);
    inverse.resize(table);
    for (std::size_t k = 0; k < table; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      forward[k] = {std::cos(angle), std::sin(angle)};
      inverse[k] = std::conj(forward[k]);
    }
    if (pow2) {
      bitrev.resize(n);
      std::size_t bits = 0;
      while ((std::size_t{1} << bits) < n) ++bits;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
        bitrev[i] = r;
      }
    }
  }

  const std::vector<cplx>& twiddles(bool inv) const { return inv ? inverse : forward; }

  std::size_t n;
  bool pow2;
  std::vector<cplx> forward;
  std::vector<cplx> inverse;
  std::vector<std::size_t> bitrev;
};

const Plan1d& plan_for(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::unique_ptr<Plan1d>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Plan1d>(n);
  return *slot;
}

// Transforms `lanes` interleaved sequences of length plan.n at once: element j
// of lane c lives at a[j * lanes + c]. lanes == 1 is a single contiguous
// sequence; lanes == W with n == H runs every column of an H x W array while
// sweeping contiguous rows.
void radix2(const Plan1d& plan, cplx* a, std::size_t lanes, bool inv) {
  const std::size_t n = plan.n;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = plan.bitrev[i];
    if (i < r) {
      cplx* x = a + i * lanes;
      cplx* y = a + r * lanes;
      for (std::size_t c = 0; c < lanes; ++c) std::swap(x[c], y[c]);
    }
  }
  const auto& tw = plan.twiddles(inv);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t base = 0; base < n; base += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const cplx w = tw[j * step];
        cplx* x = a + (base + j) * lanes;
        cplx* y = a + (base + j + half) * lanes;
        for (std::size_t c = 0; c < lanes; ++c) {
          const cplx u = x[c];
          const cplx v = mul(y[c], w);
          x[c] = u + v;
          y[c] = u - v;
        }
      }
    }
  }
}

void direct(const Plan1d& plan, cplx* a, std::size_t lanes, bool inv, std::vector<cplx>& scratch) {
  const std::size_t n = plan.n;
  const auto& tw = plan.twiddles(inv);
  scratch.assign(a, a + n * lanes);
  for (std::size_t k = 0; k < n; ++k) {
    cplx* out = a + k * lanes;
    for (std::size_t c = 0; c < lanes; ++c) out[c] = 0.0;
    std::size_t idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const cplx w = tw[idx];
      const cplx* in = scratch.data() + j * lanes;
      for (std::size_t c = 0; c < lanes; ++c) out[c] += mul(in[c], w);
      idx += k;
      if (idx >= n) idx -= n;
    }
  }
}

void run(const Plan1d& plan, cplx* a, std::size_t lanes, bool inv, std::vector<cplx>& scratch) {
  if (plan.n == 1) return;
  if (plan.pow2) {
    radix2(plan, a, lanes, inv);
  } else {
    direct(plan, a, lanes, inv, scratch);
  }
}

void transform2d(Complex2D& a, bool inv) {
  if (a.empty()) return;
  const std::size_t h = a.height();
  const std::size_t w = a.width();
  thread_local std::vector<cplx> scratch;

  cplx* data = a.values().data();
  const Plan1d& rows = plan_for(w);
  for (std::size_t r = 0; r < h; ++r) run(rows, data + r * w, 1, inv, scratch);
  run(plan_for(h), data, w, inv, scratch);

  const double scale = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (auto& v : a) v = {v.real() * scale, v.imag() * scale};
}

}  // namespace

void fft2u_inplace(Complex2D& a) { transform2d(a, false); }
void ifft2u_inplace(Complex2D& a) { transform2d(a, true); }

Complex2D fft2u(const Complex2D& a) {
  Complex2D out = a;
  transform2d(out, false);
  return out;
}

Complex2D ifft2u(const Complex2D& a) {
  Complex2D out = a;
  transform2d(out, true);
  return out;
}

}  // namespace cdpforge
