#pragma once

// Lab-frame dynamics of the NV spin-1 ground state.
//
// Basis ordering is (m_S = +1, 0, -1). All frequencies are angular (rad/s);
// fields are in tesla. The Hamiltonian is
//
//   H = D Sz^2 + gamma B0 Sz + gamma b1(t) Sx + gamma b_axial(t) Sz
//
// which is real symmetric, so per-step propagators come from a real
// eigendecomposition.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "qmag/core.hpp"

namespace qmag {

struct NvParams {
  double zero_field_splitting = constants::nv_zero_field_splitting;  // D, rad/s
  double gyromagnetic_ratio = constants::nv_gamma;                   // rad/(s·T)
  double bias_field = 0.036;                                         // B0, T (axial)
  double axis_polar = units::deg(54.0);
  double axis_azimuth = 0.0;

  /// m_S = 0 ↔ −1 transition.
  double omega_minus() const { return zero_field_splitting - gyromagnetic_ratio * bias_field; }
  /// m_S = 0 ↔ +1 transition.
  double omega_plus() const { return zero_field_splitting + gyromagnetic_ratio * bias_field; }

  void validate() const {
    if (!(zero_field_splitting > 0.0)) throw Error(ErrorKind::ConfigError, "zero-field splitting must be positive");
    if (!(gyromagnetic_ratio > 0.0)) throw Error(ErrorKind::ConfigError, "gyromagnetic ratio must be positive");
    if (!(bias_field >= 0.0)) throw Error(ErrorKind::ConfigError, "bias field must be non-negative");
    if (!(omega_minus() > 0.0))
      throw Error(ErrorKind::ConfigError, "bias field exceeds the level anticrossing (omega <= 0)");
  }
};

using SpinState = Eigen::Vector3cd;
using SpinOperator = Eigen::Matrix3d;
using Propagator = Eigen::Matrix3cd;

namespace basis {
inline constexpr int plus = 0;
inline constexpr int zero = 1;
inline constexpr int minus = 2;
}  // namespace basis

inline SpinState basis_state(int index) {
  SpinState s = SpinState::Zero();
  s(index) = 1.0;
  return s;
}

inline SpinOperator spin_x() {
  const double r = 1.0 / std::sqrt(2.0);
  SpinOperator m;
  m << 0, r, 0,
       r, 0, r,
       0, r, 0;
  return m;
}

inline SpinOperator spin_z() { return Eigen::Vector3d(1.0, 0.0, -1.0).asDiagonal(); }

inline SpinOperator hamiltonian(const NvParams& p, double b1, double b_axial) {
  const double g = p.gyromagnetic_ratio;
  SpinOperator h = SpinOperator::Zero();
  const double zeeman = g * (p.bias_field + b_axial);
  h(0, 0) = p.zero_field_splitting + zeeman;
  h(2, 2) = p.zero_field_splitting - zeeman;
  const double x = g * b1 / std::sqrt(2.0);
  h(0, 1) = h(1, 0) = x;
  h(1, 2) = h(2, 1) = x;
  return h;
}

/// exp(−i H dt) for a constant Hamiltonian over one step.
inline Propagator step_propagator(const NvParams& p, double b1, double b_axial, double dt) {
  if (b1 == 0.0) {
    const SpinOperator h = hamiltonian(p, 0.0, b_axial);
    Propagator u = Propagator::Zero();
    for (int k = 0; k < 3; ++k) u(k, k) = std::polar(1.0, -h(k, k) * dt);
    return u;
  }
  Eigen::SelfAdjointEigenSolver<SpinOperator> eig(hamiltonian(p, b1, b_axial));
  const SpinOperator& v = eig.eigenvectors();
  Eigen::Vector3cd phase;
  for (int k = 0; k < 3; ++k) phase(k) = std::polar(1.0, -eig.eigenvalues()(k) * dt);
  return v.cast<std::complex<double>>() * phase.asDiagonal() * v.transpose().cast<std::complex<double>>();
}

/// Transverse drive and axial signal on a shared grid. Sample i holds the
/// field at the midpoint of the step [i·dt, (i+1)·dt) measured from t0.
struct FieldSamples {
  double dt = 1e-12;
  double t0 = 0.0;
  std::vector<double> transverse;
  std::vector<double> axial;

  std::size_t size() const { return std::max(transverse.size(), axial.size()); }
};

/// Aligns a drive and an axial signal onto one grid (both must share dt;
/// the union span is covered and missing samples are zero).
inline FieldSamples make_field_samples(const SampledWaveform& transverse, const SampledWaveform& axial) {
  if (transverse.empty() && axial.empty()) return {};
  if (transverse.empty()) return {axial.dt, axial.t0, std::vector<double>(axial.size(), 0.0), axial.values};
  if (axial.empty())
    return {transverse.dt, transverse.t0, transverse.values, std::vector<double>(transverse.size(), 0.0)};
  const double dt = transverse.dt;
  if (std::abs(axial.dt - dt) > 1e-9 * dt) throw Error(ErrorKind::GridMismatch, "drive and signal steps differ");
  const double offset = (axial.t0 - transverse.t0) / dt;
  const long shift = std::lround(offset);
  if (std::abs(offset - static_cast<double>(shift)) > 1e-6)
    throw Error(ErrorKind::GridMismatch, "drive and signal time origins are not commensurate");
  const long begin = std::min(0L, shift);
  const long end = std::max(static_cast<long>(transverse.size()), shift + static_cast<long>(axial.size()));
  FieldSamples f;
  f.dt = dt;
  f.t0 = transverse.t0 + static_cast<double>(begin) * dt;
  f.transverse.assign(static_cast<std::size_t>(end - begin), 0.0);
  f.axial.assign(f.transverse.size(), 0.0);
  for (std::size_t i = 0; i < transverse.size(); ++i) f.transverse[static_cast<std::size_t>(-begin) + i] = transverse.values[i];
  for (std::size_t i = 0; i < axial.size(); ++i)
    f.axial[static_cast<std::size_t>(shift - begin) + i] = axial.values[i];
  return f;
}

inline void check_step(const NvParams& p, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::BadGrid, "time step must be positive");
  if (dt * p.omega_plus() >= 0.5)
    throw Error(ErrorKind::StepTooCoarse,
                "dt * omega' = " + std::to_string(dt * p.omega_plus()) + " rad (limit 0.5 rad)");
}

/// Applies the time-ordered product of per-step propagators.
inline SpinState propagate(SpinState state, std::span<const double> transverse, std::span<const double> axial,
                           double dt, const NvParams& p) {
  check_step(p, dt);
  const std::size_t n = std::max(transverse.size(), axial.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double b1 = i < transverse.size() ? transverse[i] : 0.0;
    const double bz = i < axial.size() ? axial[i] : 0.0;
    state = step_propagator(p, b1, bz, dt) * state;
  }
  return state;
}

inline SpinState propagate(const SpinState& state, const FieldSamples& fields, const NvParams& p) {
  return propagate(state, fields.transverse, fields.axial, fields.dt, p);
}

/// |<0|psi>|^2, the probability of finding the spin in m_S = 0.
inline double transition_probability(const SpinState& state) { return std::norm(state(basis::zero)); }

inline Eigen::Vector3d populations(const SpinState& state) {
  return {std::norm(state(0)), std::norm(state(1)), std::norm(state(2))};
}

}  // namespace qmag
