#pragma once

// Shot-noise figures of merit. Here p is the probability of leaving
// m_S = 0: p0 = sin²α/2 at rest and δp = slope(α)·φ for a small phase φ.

#include <algorithm>
#include <cmath>
#include <vector>

#include "qmag/core.hpp"
#include "qmag/forward.hpp"
#include "qmag/kernels.hpp"

namespace qmag {

struct SensitivityPoint {
  double alpha = 0.0;  // rad
  double tau = 0.0;    // s
  double t_min = 0.0;  // s
  double b_min = 0.0;  // T (per √Hz when T = 1 s)
};

inline double dark_baseline(double alpha) { return 0.5 * std::sin(alpha) * std::sin(alpha); }

inline double phase_slope(double alpha) { return (1.0 - std::cos(alpha)) * std::sin(alpha) / (2.0 * alpha); }

inline double expected_counts(double phi, double alpha, const ReadoutParams& readout) {
  const double p = dark_baseline(alpha) + phase_slope(alpha) * phi;
  return (1.0 - readout.contrast * p) * readout.reference_counts();
}

inline double snr(double phi, double alpha, double contrast, double c0) {
  const double s = std::sin(alpha);
  return contrast * phi * (1.0 - std::cos(alpha)) * s / (alpha * std::sqrt(4.0 - 2.0 * contrast * s * s)) * std::sqrt(c0);
}

/// Phase giving SNR = 1.
inline double min_detectable_phase(double alpha, double contrast, double c0) {
  const double s = std::sin(alpha);
  const double c = 1.0 - std::cos(alpha);
  if (s == 0.0 || c == 0.0 || std::abs(s) < 1e-15 || std::abs(c) < 1e-15)
    throw Error(ErrorKind::DegenerateAngle, "rotation angle gives no first-order response");
  return alpha * std::sqrt(4.0 - 2.0 * contrast * s * s) / (contrast * c * s * std::sqrt(c0));
}

inline double min_detectable_field(double alpha, double tau, double contrast, double gamma, double c0) {
  if (!(tau > 0.0)) throw Error(ErrorKind::ConfigError, "tau must be positive");
  return min_detectable_phase(alpha, contrast, c0) / (gamma * tau);
}

inline std::vector<SensitivityPoint> tradeoff_curve(const std::vector<double>& alphas, double rabi, double contrast,
                                                    double gamma, double c0) {
  std::vector<SensitivityPoint> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    if (!(a > 0.0 && a <= 0.5 * pi + 1e-12))
      throw Error(ErrorKind::ConfigError, "trade-off angles must lie in (0, π/2]");
    const double tau = 2.0 * a / rabi;
    out.push_back({a, tau, analytic_time_resolution(tau, a), min_detectable_field(a, tau, contrast, gamma, c0)});
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.t_min < y.t_min; });
  return out;
}

/// Angle in (0, π) maximizing the SNR at fixed φ, by golden-section search.
inline double snr_optimal_alpha(double contrast, double tol = 1e-10) {
  auto f = [&](double a) { return -snr(1.0, a, contrast, 1.0); };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 1e-6;
  double hi = pi - 1e-6;
  double x1 = hi - g * (hi - lo);
  double x2 = lo + g * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace qmag
