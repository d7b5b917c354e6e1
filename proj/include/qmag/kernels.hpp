#pragma once

// Sensing kernels: closed form for the P1-P2 sequence, lab-frame simulation
// with a narrow Gaussian axial stimulus, and the FWHM time resolution.
//
// Kernels are normalized so that k(0) = +sin α for the ideal sequence. The
// physical response of p = |<0|psi>|^2 is
//
//   δp(t) = gain · ∫ k(t' − t) γ B(t') dt'
//
// where `gain` carries both the magnitude (sin α / 2 for the ideal
// sequence) and the sign of the readout.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "qmag/core.hpp"
#include "qmag/spin.hpp"
#include "qmag/waveforms.hpp"

namespace qmag {

struct SensingKernel {
  SampledWaveform samples;  // k(t), dimensionless, t = 0 at the sequence reference
  double tau = 0.0;         // s
  double alpha = 0.0;       // rad
  double rabi = 0.0;        // rad/s
  double t_min = 0.0;       // s, FWHM
  double bandwidth = 0.0;   // Hz, ≈ 1/τ
  double gain = 0.0;        // δp per unit of ∫k γ B dt
  double baseline = 0.0;    // p0 without signal
  double gamma = constants::nv_gamma;
  std::string origin = "analytic";

  /// ∫ k dt.
  double area() const { return samples.integral(); }
  /// Linear calibration δp per tesla of a constant field.
  double field_response() const;
};

/// Closed-form FWHM of the ideal kernel.
inline double analytic_time_resolution(double tau, double alpha) {
  return tau * (1.0 - std::asin(0.5 * std::sin(alpha)) / alpha);
}

/// FWHM of |k| with linear interpolation between samples.
inline double time_resolution(const SampledWaveform& k) {
  if (k.empty()) throw Error(ErrorKind::Degenerate, "empty kernel");
  std::size_t peak = 0;
  double top = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i)
    if (std::abs(k.values[i]) > top) {
      top = std::abs(k.values[i]);
      peak = i;
    }
  if (top == 0.0) throw Error(ErrorKind::Degenerate, "kernel is identically zero");
  const double half = 0.5 * top;
  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double a = std::abs(k.values[inside]);
    const double b = std::abs(k.values[outside]);
    const double f = (a - half) / (a - b);
    return k.time(inside) + f * (k.time(outside) - k.time(inside));
  };
  std::optional<double> left, right;
  for (std::size_t i = peak; i > 0; --i)
    if (std::abs(k.values[i - 1]) < half) {
      left = crossing(i, i - 1);
      break;
    }
  for (std::size_t i = peak; i + 1 < k.size(); ++i)
    if (std::abs(k.values[i + 1]) < half) {
      right = crossing(i, i + 1);
      break;
    }
  if (!left || !right) throw Error(ErrorKind::Degenerate, "kernel does not fall below half maximum inside its grid");
  return *right - *left;
}

inline double time_resolution(const SensingKernel& k) { return time_resolution(k.samples); }

inline double SensingKernel::field_response() const {
  return gain * gamma * area();
}

/// Sign of δp for a positive axial field with the pulse_pair phase
/// convention (P2 leads P1 by +π/2, readout of m_S = 0): positive fields
/// raise p.
inline constexpr double ideal_readout_sign = 1.0;

/// Samples k(t) = sin[Ω(τ/2 − |t|)] on |t| < τ/2, zero elsewhere.
inline SensingKernel analytic_kernel(const PulsePairSpec& spec, const TimeGrid& grid) {
  const double alpha = spec.alpha();
  if (!(alpha > 0.0) || alpha > pi + 1e-12) throw Error(ErrorKind::BadGrid, "rotation angle must lie in (0, pi]");
  const double half = 0.5 * spec.duration;
  const double slack = 1e-9 * grid.step;
  if (grid.start > -half + slack || grid.stop < half - slack || !(grid.step > 0.0))
    throw Error(ErrorKind::BadGrid, "kernel grid does not cover [-tau/2, tau/2]");
  SensingKernel k;
  k.samples = SampledWaveform(grid.step, grid.start, std::vector<double>(grid.count()), "1");
  for (std::size_t i = 0; i < k.samples.size(); ++i) {
    const double t = std::abs(grid.at(i));
    k.samples.values[i] = t < half ? std::sin(spec.rabi * (half - t)) : 0.0;
  }
  k.tau = spec.duration;
  k.alpha = alpha;
  k.rabi = spec.rabi;
  k.t_min = analytic_time_resolution(spec.duration, alpha);
  k.bandwidth = 1.0 / spec.duration;
  k.gain = ideal_readout_sign * 0.5 * std::sin(alpha);
  k.baseline = 0.5 * (1.0 + std::cos(alpha) * std::cos(alpha));
  k.origin = "analytic";
  return k;
}

/// Symmetric analytic kernel grid [−range, range] with the given step.
inline SensingKernel analytic_kernel(const PulsePairSpec& spec, double step) {
  const double half = 0.5 * spec.duration;
  const double edge = std::ceil(half / step - 1e-9) * step;
  return analytic_kernel(spec, TimeGrid{-edge, edge, step});
}

struct StimulusConfig {
  double width = 20e-12;                    // σ of the Gaussian, s
  double area = 0.01 / constants::nv_gamma;  // T·s
  double grid_step = 0.0;                   // kernel step; 0 → 10 × drive dt
  bool linearity_guard = true;

  double phase(double gamma) const { return gamma * area; }
};

namespace detail {

struct KernelPropagation {
  std::vector<Propagator> steps;         // drive-only step propagators
  std::vector<SpinState> forward;        // state after j steps
  std::vector<Eigen::RowVector3cd> back; // <0| U_{N-1} ... U_j
};

inline KernelPropagation prepare_propagation(const NvParams& p, const SampledWaveform& drive) {
  KernelPropagation kp;
  const std::size_t n = drive.size();
  kp.steps.resize(n);
  parallel_for(n, [&](std::size_t j) { kp.steps[j] = step_propagator(p, drive.values[j], 0.0, drive.dt); });
  kp.forward.resize(n + 1);
  kp.forward[0] = basis_state(basis::zero);
  for (std::size_t j = 0; j < n; ++j) kp.forward[j + 1] = kp.steps[j] * kp.forward[j];
  kp.back.resize(n + 1);
  kp.back[n] = basis_state(basis::zero).adjoint();
  for (std::size_t j = n; j > 0; --j) kp.back[j - 1] = kp.back[j] * kp.steps[j - 1];
  return kp;
}

/// p with a Gaussian stimulus centred at `center` added to the axial channel.
inline double stimulated_probability(const NvParams& p, const SampledWaveform& drive, const KernelPropagation& kp,
                                     double center, double width, double area) {
  const std::size_t n = drive.size();
  const double reach = 6.0 * width;
  const double lo_t = (center - reach - drive.t0) / drive.dt;
  const double hi_t = (center + reach - drive.t0) / drive.dt;
  const auto lo = static_cast<std::size_t>(std::clamp(std::floor(lo_t), 0.0, static_cast<double>(n)));
  const auto hi = static_cast<std::size_t>(std::clamp(std::ceil(hi_t) + 1.0, 0.0, static_cast<double>(n)));
  SpinState psi = kp.forward[lo];
  const double amp = area / (width * std::sqrt(two_pi));
  for (std::size_t j = lo; j < hi; ++j) {
    const double x = (drive.time(j) - center) / width;
    const double bz = amp * std::exp(-0.5 * x * x);
    psi = step_propagator(p, drive.values[j], bz, drive.dt) * psi;
  }
  return std::norm((kp.back[hi] * psi)(0));
}

}  // namespace detail

/// Lab-frame kernel: for each stimulus position t' the spin starts in
/// m_S = 0, is propagated under drive plus stimulus, and the change of p
/// against the stimulus-free baseline gives one kernel sample. The drive
/// time axis defines the kernel time origin. `nominal` supplies τ, α and Ω
/// metadata when known.
inline SensingKernel simulate_kernel(const NvParams& params, const SampledWaveform& drive, const StimulusConfig& stim,
                                     std::optional<PulsePairSpec> nominal = std::nullopt) {
  params.validate();
  drive.validate();
  check_step(params, drive.dt);
  const double gamma = params.gyromagnetic_ratio;

  // Support of the drive.
  const double top = drive.max_abs();
  std::size_t first = 0, last = drive.size() - 1;
  if (top > 0.0) {
    while (std::abs(drive.values[first]) <= 1e-9 * top) ++first;
    while (std::abs(drive.values[last]) <= 1e-9 * top) --last;
  }
  const double support = drive.time(last) - drive.time(first) + drive.dt;
  const double tau = nominal ? nominal->duration : support;

  if (stim.phase(gamma) > 0.02 + 1e-12)
    throw Error(ErrorKind::NonlinearStimulus, "stimulus phase gamma*area exceeds 0.02 rad");
  if (stim.width > tau / 50.0 + 1e-18)
    throw Error(ErrorKind::NonlinearStimulus, "stimulus width exceeds tau/50");

  const double step = stim.grid_step > 0.0 ? stim.grid_step : 10.0 * drive.dt;
  const double t_lo = drive.time(first) - 0.5 * drive.dt - 6.0 * stim.width;
  const double t_hi = drive.time(last) + 0.5 * drive.dt + 6.0 * stim.width;
  const double start = std::floor(t_lo / step) * step;
  const double stop = std::ceil(t_hi / step) * step;
  const TimeGrid grid{start, stop, step};

  const auto kp = detail::prepare_propagation(params, drive);
  const double p0 = std::norm(kp.forward.back()(basis::zero));

  auto sweep = [&](double area) {
    std::vector<double> raw(grid.count());
    parallel_for(raw.size(), [&](std::size_t i) {
      const double p = detail::stimulated_probability(params, drive, kp, grid.at(i), stim.width, area);
      raw[i] = (p - p0) / (gamma * area);
    });
    return raw;
  };

  std::vector<double> raw = sweep(stim.area);
  double peak = 0.0, sum = 0.0;
  for (double v : raw) {
    peak = std::max(peak, std::abs(v));
    sum += v;
  }
  if (stim.linearity_guard && peak > 1e-9) {
    const std::vector<double> half = sweep(0.5 * stim.area);
    double worst = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) worst = std::max(worst, std::abs(raw[i] - half[i]));
    if (worst > 0.005 * peak)
      throw Error(ErrorKind::NonlinearStimulus,
                  "halving the stimulus area changed the kernel by " + std::to_string(100.0 * worst / peak) + "%");
  }

  // |gain| = sin α / 2: from the nominal rotation angle when known, else
  // from the baseline via p0 = (1 + cos²α)/2.
  const double magnitude = nominal ? 0.5 * std::abs(std::sin(nominal->alpha()))
                                   : std::sqrt(std::max(0.0, 0.5 * (1.0 - p0)));
  const double sign = sum >= 0.0 ? 1.0 : -1.0;
  const bool coherent = magnitude > 1e-9 && peak > 1e-9;
  const double gain = coherent ? sign * magnitude : 0.0;

  SensingKernel k;
  k.samples = SampledWaveform(step, start, std::move(raw), "1");
  if (coherent)
    for (double& v : k.samples.values) v /= gain;
  k.gain = gain;
  k.baseline = p0;
  k.gamma = gamma;
  k.tau = tau;
  if (nominal) {
    k.alpha = nominal->alpha();
    k.rabi = nominal->rabi;
  } else {
    k.alpha = std::asin(std::min(1.0, 2.0 * magnitude));
    k.rabi = tau > 0.0 ? 2.0 * k.alpha / tau : 0.0;
  }
  k.bandwidth = tau > 0.0 ? 1.0 / tau : 0.0;
  k.t_min = coherent ? time_resolution(k.samples) : 0.0;
  k.origin = "simulated";
  return k;
}

/// Resamples a kernel onto a new step by linear interpolation, keeping
/// t = 0 on the grid.
inline SampledWaveform resample_kernel(const SampledWaveform& k, double step) {
  const double start = std::floor(k.t0 / step + 1e-9) * step;
  const double stop = std::ceil(k.t_end() / step - 1e-9) * step;
  const TimeGrid grid{start, stop, step};
  SampledWaveform out(step, start, std::vector<double>(grid.count()), k.unit);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = k.at(grid.at(i));
  return out;
}

}  // namespace qmag
