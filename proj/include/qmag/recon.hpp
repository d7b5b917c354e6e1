#pragma once

// Field reconstruction by regularized (Wiener) deconvolution and
// time-of-flight estimation by cross-deconvolution of two traces.

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "qmag/core.hpp"
#include "qmag/fft.hpp"
#include "qmag/forward.hpp"
#include "qmag/kernels.hpp"

namespace qmag {

struct WienerConfig {
  double lambda = 0.2;         // relative to max|K| = 1
  double fft_padding = 2.0;    // transform length ≥ padding × trace length (rounded up to 2^n)
  bool taper = true;           // cosine taper over `taper_fraction` of each end
  double taper_fraction = 0.05;
  bool subtract_baseline = true;

  void validate() const {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::ConfigError, "lambda must be non-negative");
    if (!(fft_padding >= 2.0)) throw Error(ErrorKind::ConfigError, "fft_padding must be at least 2");
    if (!(taper_fraction >= 0.0 && taper_fraction < 0.5))
      throw Error(ErrorKind::ConfigError, "taper_fraction must lie in [0, 0.5)");
  }
};

struct ToFResult {
  double delay = 0.0;            // s, B relative to A
  double fit_uncertainty = 0.0;  // s, 1σ from the fit covariance
  double peak_amplitude = 0.0;
  double peak_snr = 0.0;
  double sinc_width = 0.0;       // s
};

namespace detail {

inline void check_uniform(const std::vector<double>& t) {
  if (t.size() < 4) throw Error(ErrorKind::GridMismatch, "trace too short");
  const double step = t[1] - t[0];
  if (!(step > 0.0)) throw Error(ErrorKind::GridMismatch, "trace times must increase");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs((t[i] - t[i - 1]) - step) > 1e-6 * step) throw Error(ErrorKind::GridMismatch, "trace grid is not uniform");
}

inline void cosine_taper(std::vector<double>& v, double fraction) {
  const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(v.size())));
  for (std::size_t i = 0; i < m; ++i) {
    const double w = 0.5 * (1.0 - std::cos(pi * (static_cast<double>(i) + 0.5) / static_cast<double>(m)));
    v[i] *= w;
    v[v.size() - 1 - i] *= w;
  }
}

inline std::vector<double> prepared(const MeasurementTrace& tr, const WienerConfig& cfg) {
  std::vector<double> y = tr.p_values;
  if (cfg.subtract_baseline)
    for (double& v : y) v -= tr.baseline;
  if (cfg.taper) cosine_taper(y, cfg.taper_fraction);
  return y;
}

/// conj(K)·Y / (|K|² + λ²) with K normalized to unit peak magnitude and the
/// scale restored afterwards.
inline fft::cvec wiener_filter(const fft::cvec& kernel_spec, const fft::cvec& data_spec, double lambda) {
  double top = 0.0;
  for (const auto& v : kernel_spec) top = std::max(top, std::abs(v));
  if (top == 0.0) throw Error(ErrorKind::ZeroKernel, "kernel spectrum is identically zero");
  fft::cvec out(data_spec.size());
  const double l2 = lambda * lambda;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::complex<double> kn = kernel_spec[i] / top;
    out[i] = std::conj(kn) * data_spec[i] / (std::norm(kn) + l2) / top;
  }
  return out;
}

}  // namespace detail

/// Estimates B(t) on the trace grid. Measured traces are a correlation with
/// k, i.e. a convolution with h(t) = k(−t); the filter is built from the
/// spectrum of h sampled at the trace step (times Δt, so discrete sums
/// approximate the continuous integral). The result is divided by the
/// kernel gain and γ.
inline SampledWaveform wiener_deconvolve(const MeasurementTrace& trace, const SensingKernel& kernel,
                                         const WienerConfig& cfg) {
  cfg.validate();
  detail::check_uniform(trace.times);
  const double dt = trace.step();
  const std::size_t n = trace.size();
  const std::size_t len = fft::next_pow2(static_cast<std::size_t>(std::ceil(cfg.fft_padding * static_cast<double>(n))));
  const SampledWaveform& k = kernel.samples;
  if (k.empty() || k.max_abs() == 0.0 || kernel.gain == 0.0) throw Error(ErrorKind::ZeroKernel, "kernel is zero");

  // h[m] = Δt·k(−mΔt), wrapped.
  fft::cvec h(len, {0.0, 0.0});
  const auto m_lo = static_cast<long>(std::floor(-k.t_end() / dt - 1e-9));
  const auto m_hi = static_cast<long>(std::ceil(-k.t0 / dt + 1e-9));
  if (m_hi - m_lo + 1 > static_cast<long>(len)) throw Error(ErrorKind::GridMismatch, "kernel longer than transform");
  for (long m = m_lo; m <= m_hi; ++m) {
    const auto idx = static_cast<std::size_t>(((m % static_cast<long>(len)) + static_cast<long>(len)) % static_cast<long>(len));
    h[idx] += dt * k.at(-static_cast<double>(m) * dt);
  }

  std::vector<double> y = detail::prepared(trace, cfg);
  for (double& v : y) v /= kernel.gain;
  const fft::cvec x = fft::inverse(detail::wiener_filter(fft::forward(h), fft::forward(fft::to_complex(y, len)), cfg.lambda));

  SampledWaveform out(dt, trace.times.front(), std::vector<double>(n), "T");
  for (std::size_t i = 0; i < n; ++i) out.values[i] = x[i].real() / kernel.gamma;
  return out;
}

namespace detail {

struct SincFit {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  Eigen::VectorXd t;
  Eigen::VectorXd y;

  int inputs() const { return 4; }
  int values() const { return static_cast<int>(t.size()); }

  static double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - (pi * x) * (pi * x) / 6.0 : std::sin(pi * x) / (pi * x); }
  static double dsinc(double x) {
    if (std::abs(x) < 1e-5) return -pi * pi * x / 3.0;
    return (std::cos(pi * x) * pi * x - std::sin(pi * x)) / (pi * x * x);
  }

  // p = (amplitude, center, width, offset)
  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
    for (Eigen::Index i = 0; i < t.size(); ++i) f(i) = p(0) * sinc((t(i) - p(1)) / p(2)) + p(3) - y(i);
    return 0;
  }
  int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double u = (t(i) - p(1)) / p(2);
      j(i, 0) = sinc(u);
      j(i, 1) = -p(0) * dsinc(u) / p(2);
      j(i, 2) = -p(0) * dsinc(u) * u / p(2);
      j(i, 3) = 1.0;
    }
    return 0;
  }
};

}  // namespace detail

/// Regularized cross-deconvolution of B by A, giving the shared delay
/// kernel δ(t − δt); the peak is fitted with a·sinc((t − δt)/w) + c.
/// Fit times are in units of the trace step internally.
inline ToFResult estimate_tof(const MeasurementTrace& a, const MeasurementTrace& b, const WienerConfig& cfg) {
  cfg.validate();
  detail::check_uniform(a.times);
  detail::check_uniform(b.times);
  if (a.size() != b.size() || std::abs(a.times.front() - b.times.front()) > 1e-6 * a.step() ||
      std::abs(a.step() - b.step()) > 1e-9 * a.step())
    throw Error(ErrorKind::GridMismatch, "ToF traces must share one grid");
  const std::size_t n = a.size();
  const double dt = a.step();
  const std::size_t len = fft::next_pow2(static_cast<std::size_t>(std::ceil(cfg.fft_padding * static_cast<double>(n))));

  const fft::cvec sa = fft::forward(fft::to_complex(detail::prepared(a, cfg), len));
  const fft::cvec sb = fft::forward(fft::to_complex(detail::prepared(b, cfg), len));
  const fft::cvec xc = fft::inverse(detail::wiener_filter(sa, sb, cfg.lambda));

  // Lags −n/2 … n/2 in index order.
  const long half = static_cast<long>(n / 2);
  std::vector<double> lag_values(static_cast<std::size_t>(2 * half + 1));
  for (long l = -half; l <= half; ++l) {
    const auto idx = static_cast<std::size_t>((l + static_cast<long>(len)) % static_cast<long>(len));
    lag_values[static_cast<std::size_t>(l + half)] = xc[idx].real();
  }
  const auto peak_it = std::max_element(lag_values.begin(), lag_values.end());
  const auto peak = static_cast<long>(peak_it - lag_values.begin());
  const double top = *peak_it;

  // Main lobe: walk out until the value drops below 20% of the peak or
  // starts rising again.
  auto extent = [&](int dir) {
    long i = peak;
    while (true) {
      const long next = i + dir;
      if (next < 0 || next >= static_cast<long>(lag_values.size())) break;
      const double v = lag_values[static_cast<std::size_t>(next)];
      if (v > lag_values[static_cast<std::size_t>(i)]) break;
      i = next;
      if (v < 0.2 * top) break;
    }
    return std::abs(i - peak);
  };
  const long reach = std::max<long>(3, std::max(extent(-1), extent(+1)) + 1);
  const long lo = std::max<long>(0, peak - reach);
  const long hi = std::min<long>(static_cast<long>(lag_values.size()) - 1, peak + reach);

  // Noise floor from lags away from the peak; the outer half of the lag
  // range when the peak is too broad to leave a clean background.
  double ss = 0.0;
  std::size_t cnt = 0;
  for (long i = 0; i < static_cast<long>(lag_values.size()); ++i) {
    const long d = std::abs(i - peak);
    if (d > 2 * reach || (2 * reach >= half && d > half / 2)) {
      ss += lag_values[static_cast<std::size_t>(i)] * lag_values[static_cast<std::size_t>(i)];
      ++cnt;
    }
  }
  const double floor_rms = cnt > 0 ? std::sqrt(ss / static_cast<double>(cnt)) : 0.0;
  const double snr = floor_rms > 0.0 ? top / floor_rms : std::numeric_limits<double>::infinity();
  if (!(top > 0.0) || snr < 3.0) throw Error(ErrorKind::NoPeak, "cross-deconvolution peak SNR " + std::to_string(snr) + " < 3");

  detail::SincFit fit;
  const long m = hi - lo + 1;
  fit.t.resize(m);
  fit.y.resize(m);
  for (long i = 0; i < m; ++i) {
    fit.t(i) = static_cast<double>(lo + i - half);
    fit.y(i) = lag_values[static_cast<std::size_t>(lo + i)];
  }
  // Initial width from the half maximum: sinc half-width at half max ≈ 0.6034 w.
  double hwhm = 0.5;
  for (long i = peak; i < hi; ++i)
    if (lag_values[static_cast<std::size_t>(i + 1)] < 0.5 * top) {
      const double v0 = lag_values[static_cast<std::size_t>(i)];
      const double v1 = lag_values[static_cast<std::size_t>(i + 1)];
      hwhm = static_cast<double>(i - peak) + (v0 - 0.5 * top) / (v0 - v1);
      break;
    }
  Eigen::VectorXd p(4);
  p << top, static_cast<double>(peak - half), std::max(1.0, hwhm / 0.6034), 0.0;
  Eigen::LevenbergMarquardt<detail::SincFit> lm(fit);
  lm.parameters.xtol = 1e-12;
  lm.parameters.ftol = 1e-14;
  lm.parameters.maxfev = 2000;
  lm.minimize(p);

  Eigen::VectorXd resid(m);
  fit(p, resid);
  Eigen::MatrixXd jac(m, 4);
  fit.df(p, jac);
  const double dof = std::max<double>(1.0, static_cast<double>(m - 4));
  const double s2 = resid.squaredNorm() / dof;
  const Eigen::MatrixXd cov = (jac.transpose() * jac).inverse() * s2;
  const double sigma = std::sqrt(std::max(0.0, cov(1, 1)));

  ToFResult r;
  r.delay = p(1) * dt;
  r.fit_uncertainty = std::max(sigma, 1e-9) * dt;  // floor keeps the uncertainty positive for exact fits
  r.peak_amplitude = p(0);
  r.peak_snr = snr;
  r.sinc_width = std::abs(p(2)) * dt;
  return r;
}

}  // namespace qmag
