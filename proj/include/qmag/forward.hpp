#pragma once

// Measurement forward model: linear convolution response, full lab-frame
// response, and equivalent-time sampling with photon shot noise.
//
// p is the m_S = 0 population. The m_S = 0 state is the bright one, so a
// point with population p yields on average [1 − ε(1 − p)]·C0 photons.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "qmag/core.hpp"
#include "qmag/kernels.hpp"
#include "qmag/spin.hpp"

namespace qmag {

struct ReadoutParams {
  double contrast = 0.35;     // ε
  double cw_rate = 1.5e6;     // I0, counts/s
  double t_int = 400e-9;      // s
  double t_seq = 2.5e-6;      // s
  double total_time = 1.0;    // T, s per point

  /// C0 = I0 · T · t_int / t_seq.
  double reference_counts() const { return cw_rate * total_time * t_int / t_seq; }

  void validate() const {
    if (!(contrast > 0.0 && contrast < 1.0)) throw Error(ErrorKind::ConfigError, "contrast must lie in (0, 1)");
    if (!(cw_rate > 0.0) || !(t_int > 0.0) || !(t_seq > 0.0) || !(total_time > 0.0))
      throw Error(ErrorKind::ConfigError, "readout rates and times must be positive");
  }
};

struct SamplingPlan {
  double t_start = -10e-9;
  double t_end = 10e-9;
  double step = 50e-12;           // Δt
  double trigger_jitter_rms = 0;  // s
  int jitter_samples = 1;         // delay draws averaged per point
  std::uint64_t rng_seed = 1;
  bool shot_noise = true;
  double min_counts = 100.0;      // C0 floor for reliable normalization
  double display_filter_tau = 0;  // s; zero-phase one-pole smoothing of the output, 0 = off

  std::size_t count() const { return TimeGrid{t_start, t_end, step}.count(); }
  double time(std::size_t i) const { return t_start + static_cast<double>(i) * step; }

  void validate() const {
    if (!(step > 0.0)) throw Error(ErrorKind::ConfigError, "sampling step must be positive");
    if (!(t_end >= t_start)) throw Error(ErrorKind::ConfigError, "sampling window is empty");
    if (!(trigger_jitter_rms >= 0.0)) throw Error(ErrorKind::ConfigError, "jitter must be non-negative");
    if (jitter_samples < 1) throw Error(ErrorKind::ConfigError, "jitter_samples must be at least 1");
  }
};

struct MeasurementTrace {
  std::vector<double> times;
  std::vector<double> p_values;
  std::vector<double> field_values;  // T, (p − p0) / calibration
  std::vector<double> signal_counts;
  std::vector<double> bright_counts;
  std::vector<double> dark_counts;
  double baseline = 0.0;     // p0
  double calibration = 0.0;  // δp per tesla of constant field
  ReadoutParams readout;
  SamplingPlan plan;
  std::string responder = "ideal";
  bool noisy = false;

  std::size_t size() const { return times.size(); }
  double step() const { return times.size() > 1 ? times[1] - times[0] : plan.step; }
};

/// p(t) for a sequence centred at delay t.
struct Responder {
  std::function<double(double)> probability;
  double baseline = 0.0;
  std::string kind = "ideal";
};

/// δp(t) = gain · γ · Σ_j k(t_j − t) B_j dt over the signal samples.
inline double convolve_at(const SensingKernel& kernel, const SampledWaveform& signal, double t) {
  const SampledWaveform& k = kernel.samples;
  if (k.empty() || signal.empty()) return 0.0;
  const double lo = t + k.t0;
  const double hi = t + k.t_end();
  const auto j0 = static_cast<long>(std::max(0.0, std::ceil((lo - signal.t0) / signal.dt - 1e-9)));
  const auto j1 = static_cast<long>(
      std::min(static_cast<double>(signal.size()) - 1.0, std::floor((hi - signal.t0) / signal.dt + 1e-9)));
  double acc = 0.0;
  for (long j = j0; j <= j1; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    acc += k.at(signal.time(ju) - t) * signal.values[ju];
  }
  return kernel.gain * kernel.gamma * acc * signal.dt;
}

inline Responder ideal_responder(const SensingKernel& kernel, const SampledWaveform& signal) {
  return {[kernel, signal](double t) { return kernel.baseline + convolve_at(kernel, signal, t); }, kernel.baseline,
          "ideal"};
}

/// Exact lab-frame p with the drive's reference instant placed at `delay`
/// on the signal time axis. Only the drive span is propagated: outside it
/// the Hamiltonian is diagonal and populations do not change.
inline double full_response(const NvParams& params, const SampledWaveform& drive, const SampledWaveform& signal,
                            double delay) {
  check_step(params, drive.dt);
  SpinState psi = basis_state(basis::zero);
  for (std::size_t i = 0; i < drive.size(); ++i) {
    const double bz = signal.at(delay + drive.time(i));
    psi = step_propagator(params, drive.values[i], bz, drive.dt) * psi;
  }
  return transition_probability(psi);
}

inline Responder full_responder(const NvParams& params, const SampledWaveform& drive, const SampledWaveform& signal) {
  const SampledWaveform none(drive.dt, 0.0, {0.0});
  const double p0 = full_response(params, drive, none, 0.0);
  return {[params, drive, signal](double t) { return full_response(params, drive, signal, t); }, p0, "full"};
}

namespace detail {

inline std::mt19937_64 point_stream(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32),
                    0x716d6167u};
  return std::mt19937_64(seq);
}

inline void zero_phase_smooth(std::vector<double>& v, double step, double tau) {
  if (tau <= 0.0 || v.size() < 2) return;
  const double a = std::exp(-step / tau);
  double s = v.front();
  for (double& x : v) x = s = a * s + (1.0 - a) * x;
  s = v.back();
  for (auto it = v.rbegin(); it != v.rend(); ++it) *it = s = a * s + (1.0 - a) * *it;
}

}  // namespace detail

/// Equivalent-time sampling of a responder. Each point draws its own
/// trigger jitter and photon counts from a stream derived from
/// (rng_seed, point index), so traces do not depend on evaluation order.
/// `calibration` converts δp to field (δp per tesla); zero leaves
/// field_values at zero.
inline MeasurementTrace sample_trace(const Responder& responder, const SamplingPlan& plan,
                                     const ReadoutParams& readout, double calibration) {
  plan.validate();
  readout.validate();
  const double c0 = readout.reference_counts();
  if (plan.shot_noise && c0 < plan.min_counts)
    throw Error(ErrorKind::InvalidCounts,
                "reference counts C0 = " + std::to_string(c0) + " below floor " + std::to_string(plan.min_counts));

  MeasurementTrace tr;
  const std::size_t n = plan.count();
  tr.times.resize(n);
  tr.p_values.resize(n);
  tr.field_values.assign(n, 0.0);
  if (plan.shot_noise) {
    tr.signal_counts.resize(n);
    tr.bright_counts.resize(n);
    tr.dark_counts.resize(n);
  }
  tr.baseline = responder.baseline;
  tr.calibration = calibration;
  tr.readout = readout;
  tr.plan = plan;
  tr.responder = responder.kind;
  tr.noisy = plan.shot_noise;

  const double eps = readout.contrast;
  parallel_for(n, [&](std::size_t i) {
    const double t = plan.time(i);
    tr.times[i] = t;
    auto rng = detail::point_stream(plan.rng_seed, i);
    double p = 0.0;
    if (plan.trigger_jitter_rms > 0.0) {
      std::normal_distribution<double> jitter(0.0, plan.trigger_jitter_rms);
      for (int m = 0; m < plan.jitter_samples; ++m) p += responder.probability(t + jitter(rng));
      p /= plan.jitter_samples;
    } else {
      p = responder.probability(t);
    }
    if (!plan.shot_noise) {
      tr.p_values[i] = p;
      return;
    }
    std::poisson_distribution<long long> signal(std::max(0.0, (1.0 - eps * (1.0 - p)) * c0));
    std::poisson_distribution<long long> bright(c0);
    std::poisson_distribution<long long> dark((1.0 - eps) * c0);
    const auto ns = static_cast<double>(signal(rng));
    const auto nb = static_cast<double>(bright(rng));
    const auto nd = static_cast<double>(dark(rng));
    tr.signal_counts[i] = ns;
    tr.bright_counts[i] = nb;
    tr.dark_counts[i] = nd;
    tr.p_values[i] = nb > nd ? (ns - nd) / (nb - nd) : p;
  });

  detail::zero_phase_smooth(tr.p_values, plan.step, plan.display_filter_tau);
  if (calibration != 0.0)
    for (std::size_t i = 0; i < n; ++i) tr.field_values[i] = (tr.p_values[i] - tr.baseline) / calibration;
  return tr;
}

/// Noiseless linear-response trace from a kernel and a signal.
inline MeasurementTrace ideal_response(const SensingKernel& kernel, const SampledWaveform& signal, SamplingPlan plan) {
  plan.shot_noise = false;
  plan.trigger_jitter_rms = 0.0;
  return sample_trace(ideal_responder(kernel, signal), plan, ReadoutParams{}, kernel.field_response());
}

}  // namespace qmag
