#pragma once

// Shared vocabulary: physical constants, the error type, uniformly sampled
// waveforms and a deterministic parallel loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace qmag {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

namespace constants {
inline constexpr double mu0 = 4.0e-7 * pi;              // T·m/A
inline constexpr double bohr_magneton = 9.274e-24;      // J/T
inline constexpr double nv_gamma = two_pi * 28.0345e9;  // rad/(s·T)
inline constexpr double nv_zero_field_splitting = two_pi * 2.87e9;  // rad/s
}  // namespace constants

namespace units {
/// µ_B/nm² → A (moment per area).
constexpr double bohr_per_nm2(double value) { return value * constants::bohr_magneton / 1e-18; }
constexpr double hz_to_angular(double f) { return two_pi * f; }
constexpr double angular_to_hz(double w) { return w / two_pi; }
constexpr double deg(double d) { return d * pi / 180.0; }
}  // namespace units

enum class ErrorKind {
  StepTooCoarse,
  BadGrid,
  NonlinearStimulus,
  Degenerate,
  BadImpulse,
  GridTooCoarse,
  InvalidCounts,
  GridMismatch,
  ZeroKernel,
  NoPeak,
  DegenerateAngle,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::StepTooCoarse: return "StepTooCoarse";
    case ErrorKind::BadGrid: return "BadGrid";
    case ErrorKind::NonlinearStimulus: return "NonlinearStimulus";
    case ErrorKind::Degenerate: return "Degenerate";
    case ErrorKind::BadImpulse: return "BadImpulse";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::InvalidCounts: return "InvalidCounts";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::ZeroKernel: return "ZeroKernel";
    case ErrorKind::NoPeak: return "NoPeak";
    case ErrorKind::DegenerateAngle: return "DegenerateAngle";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Uniformly sampled real time series. Sample i sits at t0 + i·dt.
struct SampledWaveform {
  double dt = 1e-12;
  double t0 = 0.0;
  std::vector<double> values;
  std::string unit = "T";

  SampledWaveform() = default;
  SampledWaveform(double step, double start, std::vector<double> v, std::string u = "T")
      : dt(step), t0(start), values(std::move(v)), unit(std::move(u)) {}

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  double t_end() const { return values.empty() ? t0 : time(values.size() - 1); }

  /// Linear interpolation, zero outside the sampled span.
  double at(double t) const {
    if (values.empty()) return 0.0;
    const double x = (t - t0) / dt;
    if (x < 0.0) return x > -1e-9 ? values.front() : 0.0;
    const auto last = static_cast<double>(values.size() - 1);
    if (x > last) return x < last + 1e-9 ? values.back() : 0.0;
    const auto i = static_cast<std::size_t>(std::floor(x));
    if (i + 1 >= values.size()) return values.back();
    const double f = x - static_cast<double>(i);
    return values[i] * (1.0 - f) + values[i + 1] * f;
  }

  /// Trapezoidal integral over the sampled span.
  double integral() const {
    if (values.size() < 2) return values.empty() ? 0.0 : values.front() * dt;
    double s = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) s += values[i];
    return s * dt;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::BadGrid, "waveform step must be positive");
    if (values.empty()) throw Error(ErrorKind::BadGrid, "waveform has no samples");
    for (double v : values)
      if (!std::isfinite(v)) throw Error(ErrorKind::BadGrid, "waveform contains non-finite samples");
  }
};

/// Uniform grid [start, stop] with the given step (inclusive of both ends
/// when they fall on the grid).
struct TimeGrid {
  double start = 0.0;
  double stop = 0.0;
  double step = 1e-12;

  std::size_t count() const {
    return static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  }
  double at(std::size_t i) const { return start + static_cast<double>(i) * step; }
};

/// Linear resampling onto a new step over the same span.
inline SampledWaveform resample(const SampledWaveform& w, double step) {
  const TimeGrid grid{w.t0, w.t_end(), step};
  SampledWaveform out(step, w.t0, std::vector<double>(grid.count()), w.unit);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = w.at(grid.at(i));
  return out;
}

inline unsigned worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs fn(i) for i in [0, n). Each index must write only its own output
/// slot; results are then independent of scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = worker_count()) {
  if (n == 0) return;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(threads);
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace qmag
