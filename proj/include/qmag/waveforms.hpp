#pragma once

// Control-pulse synthesis, excitation-path distortion and magnetic test
// transients.
//
// Drive waveforms live on a time axis whose origin is the sequence
// reference instant (the phase jump between P1 and P2). Sample i of a
// drive holds the field at the midpoint of its step cell.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmag/core.hpp"
#include "qmag/fft.hpp"

namespace qmag {

/// Two concatenated equal pulses (P1, P2) with a phase jump between them.
struct PulsePairSpec {
  double rabi = two_pi * 125e6;  // Ω, rad/s
  double duration = 4e-9;        // τ, s (both pulses)
  double carrier = 0.0;          // ω, rad/s
  double phase_jump = pi / 2;    // rad
  // Carrier phase of P1 at its start. Unset: chosen so that B1(t) = B1(−t)
  // about the phase jump, which makes the lab-frame kernel exactly even.
  std::optional<double> initial_phase;

  double start_phase() const {
    return initial_phase ? *initial_phase : -0.5 * phase_jump - 0.5 * carrier * duration;
  }

  double alpha() const { return 0.5 * rabi * duration; }
  /// B_mw = √2 Ω / γ.
  double amplitude(double gamma = constants::nv_gamma) const { return std::sqrt(2.0) * rabi / gamma; }

  static PulsePairSpec from_alpha(double rabi, double alpha, double carrier) {
    PulsePairSpec s;
    s.rabi = rabi;
    s.duration = 2.0 * alpha / rabi;
    s.carrier = carrier;
    return s;
  }
};

/// Samples B1(t) = B_mw cos(ω(t + τ/2) + φ) over [−τ/2, τ/2), with φ jumping
/// by phase_jump at t = 0 (the sequence reference). `pad_before` / `pad_after` add zero-field time.
inline SampledWaveform pulse_pair(const PulsePairSpec& spec, double dt, double gamma = constants::nv_gamma,
                                  double pad_before = 0.0, double pad_after = 0.0) {
  if (!(dt > 0.0)) throw Error(ErrorKind::BadGrid, "pulse step must be positive");
  if (dt * spec.carrier >= 0.5) throw Error(ErrorKind::StepTooCoarse, "dt * omega must stay below 0.5 rad");
  const double cells = spec.duration / dt;
  const auto n = static_cast<long>(std::lround(cells));
  if (n < 2 || std::abs(cells - static_cast<double>(n)) > 1e-6)
    throw Error(ErrorKind::BadGrid, "pulse duration must be an integer multiple of dt");
  const auto n_before = static_cast<long>(std::lround(pad_before / dt));
  const auto n_after = static_cast<long>(std::lround(pad_after / dt));
  const double half = 0.5 * static_cast<double>(n) * dt;
  const double amp = spec.amplitude(gamma);

  SampledWaveform w;
  w.dt = dt;
  w.unit = "T";
  w.t0 = -half - static_cast<double>(n_before) * dt + 0.5 * dt;
  w.values.assign(static_cast<std::size_t>(n_before + n + n_after), 0.0);
  for (long i = 0; i < n; ++i) {
    const double t = -half + (static_cast<double>(i) + 0.5) * dt;
    const double phase = spec.start_phase() + (t >= 0.0 ? spec.phase_jump : 0.0);
    w.values[static_cast<std::size_t>(n_before + i)] = amp * std::cos(spec.carrier * (t + half) + phase);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Excitation-path distortion
// ---------------------------------------------------------------------------

struct DistortionModel {
  enum class Kind { None, LowPass, Measured };
  Kind kind = Kind::None;
  double f3db = 1e9;      // Hz, single-pole corner
  double carrier = 0.0;   // rad/s; when > 0 the low-pass acts on the envelope around the carrier
  std::optional<SampledWaveform> impulse;  // taps for Kind::Measured, same dt as the input

  static DistortionModel none() { return {}; }
  static DistortionModel low_pass(double f3db, double carrier = 0.0) {
    DistortionModel m;
    m.kind = Kind::LowPass;
    m.f3db = f3db;
    m.carrier = carrier;
    return m;
  }
  static DistortionModel measured(SampledWaveform taps) {
    DistortionModel m;
    m.kind = Kind::Measured;
    m.impulse = std::move(taps);
    return m;
  }
};

inline const char* to_string(DistortionModel::Kind k) {
  switch (k) {
    case DistortionModel::Kind::None: return "none";
    case DistortionModel::Kind::LowPass: return "lowpass";
    case DistortionModel::Kind::Measured: return "measured";
  }
  return "none";
}

namespace detail {
template <class T>
std::vector<T> one_pole(const std::vector<T>& x, double a) {
  std::vector<T> y(x.size());
  T state{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    state = a * state + (1.0 - a) * x[i];
    y[i] = state;
  }
  return y;
}
}  // namespace detail

/// Causal filtering of a waveform. The single-pole filter is the exact
/// discretization of an RC section with unit DC gain. With a carrier set,
/// the same filter is applied to the complex envelope so that rise and
/// ringdown act on the pulse shape rather than attenuating the carrier.
inline SampledWaveform distort(const SampledWaveform& w, const DistortionModel& model) {
  using Kind = DistortionModel::Kind;
  switch (model.kind) {
    case Kind::None:
      return w;
    case Kind::LowPass: {
      if (!(model.f3db > 0.0)) throw Error(ErrorKind::ConfigError, "low-pass corner must be positive");
      const double a = std::exp(-two_pi * model.f3db * w.dt);
      SampledWaveform out = w;
      if (model.carrier <= 0.0) {
        out.values = detail::one_pole(w.values, a);
        return out;
      }
      const fft::cvec z = fft::analytic_signal(w.values);
      fft::cvec env(z.size());
      for (std::size_t i = 0; i < z.size(); ++i)
        env[i] = z[i] * std::polar(1.0, -model.carrier * w.time(i));
      env = detail::one_pole(env, a);
      for (std::size_t i = 0; i < z.size(); ++i)
        out.values[i] = (env[i] * std::polar(1.0, model.carrier * w.time(i))).real();
      return out;
    }
    case Kind::Measured: {
      if (!model.impulse || model.impulse->empty())
        throw Error(ErrorKind::BadImpulse, "measured distortion requires an impulse response");
      const SampledWaveform& h = *model.impulse;
      if (std::abs(h.dt - w.dt) > 1e-9 * w.dt)
        throw Error(ErrorKind::BadImpulse, "impulse response step differs from waveform step");
      SampledWaveform out = w;
      for (std::size_t n = 0; n < w.size(); ++n) {
        double acc = 0.0;
        for (std::size_t j = 0; j < h.size() && j <= n; ++j) acc += h.values[j] * w.values[n - j];
        out.values[n] = acc;
      }
      return out;
    }
  }
  return w;
}

/// Appends `duration` of zero samples (room for ringdown before filtering).
inline SampledWaveform pad_after(SampledWaveform w, double duration) {
  const auto n = static_cast<std::size_t>(std::lround(duration / w.dt));
  w.values.resize(w.values.size() + n, 0.0);
  return w;
}

// ---------------------------------------------------------------------------
// Magnetic test transients
// ---------------------------------------------------------------------------

/// Unit vector of the NV axis: polar angle from the film normal (lab z),
/// azimuth from lab x.
inline Eigen::Vector3d nv_axis(double polar, double azimuth) {
  return {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), std::cos(polar)};
}

struct DomainWallScenario {
  double surface_magnetization = units::bohr_per_nm2(25.0);  // A
  double standoff = 150e-9;                                  // m
  double velocity = 100.0;                                   // m/s
  double nv_polar = units::deg(54.0);
  double nv_azimuth = 0.0;

  void validate() const {
    if (!(standoff > 0.0)) throw Error(ErrorKind::ConfigError, "standoff must be positive");
    if (!(velocity > 0.0)) throw Error(ErrorKind::ConfigError, "velocity must be positive");
  }
};

/// Stray field of a sharp wall (along y at x = 0) between out-of-plane
/// domains, thin-film limit; "up" domain on x > 0. x is the NV position
/// relative to the wall.
inline Eigen::Vector3d domain_wall_field(const DomainWallScenario& s, double x) {
  const double z = s.standoff;
  const double scale = constants::mu0 * s.surface_magnetization / pi;
  const double r2 = x * x + z * z;
  return {-scale * z / r2, 0.0, scale * x / r2};
}

/// NV-axis projection of the wall field with x = v·t.
inline SampledWaveform domain_wall_transient(const DomainWallScenario& s, const TimeGrid& grid) {
  s.validate();
  const Eigen::Vector3d n = nv_axis(s.nv_polar, s.nv_azimuth);
  SampledWaveform w(grid.step, grid.start, std::vector<double>(grid.count()), "T");
  for (std::size_t i = 0; i < w.size(); ++i) w.values[i] = n.dot(domain_wall_field(s, s.velocity * grid.at(i)));
  return w;
}

struct DiskReversalScenario {
  double diameter = 1e-6;                                    // m
  double surface_magnetization = units::bohr_per_nm2(75.0);  // A
  double wall_velocity = 100.0;                              // m/s
  double wall_width = 50e-9;                                 // m
  double standoff = 100e-9;                                  // m, NV above the disk center
  double nv_polar = units::deg(54.0);
  double nv_azimuth = units::deg(90.0);
  double resolution = 25e-9;                                 // m, quadrature cell size
  double sweep_azimuth = units::deg(90.0);                   // in-plane direction of wall motion
  int chirality = -1;                                        // sign of the in-plane core along the sweep
  bool check_convergence = true;

  void validate() const {
    if (!(diameter > 0.0)) throw Error(ErrorKind::ConfigError, "diameter must be positive");
    if (!(standoff > 0.0)) throw Error(ErrorKind::ConfigError, "standoff must be positive");
    if (!(wall_velocity > 0.0)) throw Error(ErrorKind::ConfigError, "wall velocity must be positive");
    if (!(wall_width > 0.0) || !(wall_width < diameter))
      throw Error(ErrorKind::ConfigError, "wall width must be positive and smaller than the diameter");
    if (!(resolution > 0.0) || resolution > 0.5 * wall_width + 1e-15)
      throw Error(ErrorKind::GridTooCoarse, "quadrature resolution must not exceed half the wall width");
  }
};

namespace detail {

/// Precomputed polar quadrature of the dipole-sheet kernel, expressed in
/// the wall frame (u along the sweep, v along the wall).
struct DiskQuadrature {
  std::vector<double> u;       // cell position along the sweep
  std::vector<double> w_perp;  // n·B per unit out-of-plane moment
  std::vector<double> w_core;  // n·B per unit in-plane moment along u

  DiskQuadrature(const DiskReversalScenario& s, double h) {
    const double radius = 0.5 * s.diameter;
    const double z = s.standoff;
    const double rel = s.nv_azimuth - s.sweep_azimuth;
    const Eigen::Vector3d n(std::sin(s.nv_polar) * std::cos(rel), std::sin(s.nv_polar) * std::sin(rel),
                            std::cos(s.nv_polar));
    const auto rings = static_cast<std::size_t>(std::ceil(radius / h));
    const double dr = radius / static_cast<double>(rings);
    for (std::size_t i = 0; i < rings; ++i) {
      const double r = (static_cast<double>(i) + 0.5) * dr;
      const auto sectors = std::max<std::size_t>(4, static_cast<std::size_t>(std::ceil(two_pi * r / h)));
      const double dphi = two_pi / static_cast<double>(sectors);
      const double area = r * dr * dphi;
      for (std::size_t j = 0; j < sectors; ++j) {
        const double phi = (static_cast<double>(j) + 0.5) * dphi;
        const double cu = r * std::cos(phi);
        const double cv = r * std::sin(phi);
        const Eigen::Vector3d d(-cu, -cv, z);  // cell → NV
        const double len = d.norm();
        const Eigen::Vector3d e = d / len;
        const double pref = constants::mu0 / (4.0 * pi) * area / (len * len * len);
        const double ne = n.dot(e);
        u.push_back(cu);
        w_perp.push_back(pref * (3.0 * e.z() * ne - n.z()));
        w_core.push_back(pref * (3.0 * e.x() * ne - n.x()));
      }
    }
  }

  /// Projected field with the wall at position xw (tanh profile of width
  /// parameter delta, up on the u > xw side).
  double field(double xw, double delta, double ms, int chirality) const {
    double acc = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) {
      const double q = (u[c] - xw) / delta;
      const double mz = std::tanh(q);
      const double mu = std::abs(q) > 40.0 ? 0.0 : 1.0 / std::cosh(q);
      acc += mz * w_perp[c] + chirality * mu * w_core[c];
    }
    return ms * acc;
  }
};

inline SampledWaveform disk_transient_at(const DiskReversalScenario& s, const TimeGrid& grid, double h) {
  const DiskQuadrature quad(s, h);
  const double radius = 0.5 * s.diameter;
  const double delta = s.wall_width / pi;
  SampledWaveform w(grid.step, grid.start, std::vector<double>(grid.count()), "T");
  parallel_for(w.size(), [&](std::size_t i) {
    const double xw = -radius + s.wall_velocity * grid.at(i);
    w.values[i] = quad.field(xw, delta, s.surface_magnetization, s.chirality);
  });
  return w;
}

}  // namespace detail

/// Projected stray field at the NV while a wall sweeps across the disk.
/// t = 0 is the moment the wall enters the disk edge. With
/// check_convergence, the quadrature is repeated at half the cell size and
/// the refined result is returned if the two agree to 1% of the peak.
inline SampledWaveform disk_reversal_transient(const DiskReversalScenario& s, const TimeGrid& grid) {
  s.validate();
  SampledWaveform coarse = detail::disk_transient_at(s, grid, s.resolution);
  if (!s.check_convergence) return coarse;
  SampledWaveform fine = detail::disk_transient_at(s, grid, 0.5 * s.resolution);
  const double peak = fine.max_abs();
  double diff = 0.0;
  for (std::size_t i = 0; i < fine.size(); ++i) diff = std::max(diff, std::abs(fine.values[i] - coarse.values[i]));
  if (peak > 0.0 && diff > 0.01 * peak)
    throw Error(ErrorKind::GridTooCoarse, "disk quadrature changed by " + std::to_string(100.0 * diff / peak) +
                                              "% under 2x refinement");
  return fine;
}

/// Smooth pulse with error-function edges: rises around t_on, falls around
/// t_off, 10-90% edge time ≈ 1.8·edge.
inline SampledWaveform smooth_pulse(double amplitude, double t_on, double t_off, double edge, const TimeGrid& grid) {
  SampledWaveform w(grid.step, grid.start, std::vector<double>(grid.count()), "T");
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double t = grid.at(i);
    w.values[i] = 0.5 * amplitude * (std::erf((t - t_on) / edge) - std::erf((t - t_off) / edge));
  }
  return w;
}

/// Delays a waveform by `delay` on the same grid. Integer-sample delays
/// are pure index shifts; fractional delays use a zero-padded Fourier
/// phase ramp (band-limited interpolation).
inline SampledWaveform shift(const SampledWaveform& base, double delay) {
  SampledWaveform out = base;
  const double samples = delay / base.dt;
  const long n = std::lround(samples);
  if (std::abs(samples - static_cast<double>(n)) < 1e-9) {
    for (std::size_t i = 0; i < base.size(); ++i) {
      const long src = static_cast<long>(i) - n;
      out.values[i] = (src >= 0 && src < static_cast<long>(base.size())) ? base.values[static_cast<std::size_t>(src)] : 0.0;
    }
    return out;
  }
  const std::size_t len = fft::next_pow2(4 * base.size());
  fft::cvec spec = fft::forward(fft::to_complex(base.values, len));
  for (std::size_t k = 0; k < len; ++k) {
    if (len % 2 == 0 && k == len / 2) {
      spec[k] *= std::cos(fft::bin_frequency(k, len, base.dt) * delay);
      continue;
    }
    spec[k] *= std::polar(1.0, -fft::bin_frequency(k, len, base.dt) * delay);
  }
  const fft::cvec back = fft::inverse(spec);
  for (std::size_t i = 0; i < base.size(); ++i) out.values[i] = back[i].real();
  return out;
}

/// Returns (base, base delayed by delay).
inline std::pair<SampledWaveform, SampledWaveform> tof_pair(const SampledWaveform& base, double delay) {
  return {base, shift(base, delay)};
}

}  // namespace qmag
