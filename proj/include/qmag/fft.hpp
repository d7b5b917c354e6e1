#pragma once

// Thin wrapper over Eigen's FFT module (kissfft backend).

#include <unsupported/Eigen/FFT>

#include <complex>
#include <cstddef>
#include <vector>

namespace qmag::fft {

using cvec = std::vector<std::complex<double>>;

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

inline cvec forward(const cvec& x) {
  Eigen::FFT<double> engine;
  cvec out;
  engine.fwd(out, x);
  return out;
}

/// Inverse transform including the 1/N normalization.
inline cvec inverse(const cvec& x) {
  Eigen::FFT<double> engine;
  cvec out;
  engine.inv(out, x);
  return out;
}

inline cvec to_complex(const std::vector<double>& x, std::size_t padded) {
  cvec out(padded, {0.0, 0.0});
  for (std::size_t i = 0; i < x.size() && i < padded; ++i) out[i] = x[i];
  return out;
}

/// Angular frequency of FFT bin k for length n and sample step dt.
inline double bin_frequency(std::size_t k, std::size_t n, double dt) {
  const auto kk = static_cast<double>(k);
  const auto nn = static_cast<double>(n);
  const double f = (k <= n / 2 ? kk : kk - nn) / (nn * dt);
  return 2.0 * 3.141592653589793238462643383279502884 * f;
}

/// Analytic signal x + i·H[x] computed with zero padding to at least 2n.
inline cvec analytic_signal(const std::vector<double>& x) {
  const std::size_t n = next_pow2(2 * x.size());
  cvec spec = forward(to_complex(x, n));
  for (std::size_t k = 1; k < n / 2; ++k) spec[k] *= 2.0;
  for (std::size_t k = n / 2 + 1; k < n; ++k) spec[k] = 0.0;
  cvec z = inverse(spec);
  z.resize(x.size());
  return z;
}

}  // namespace qmag::fft
