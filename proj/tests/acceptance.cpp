// Acceptance run: one PASS/FAIL line per criterion. The process exits 0
// once every criterion has been evaluated; a failing criterion is reported,
// not turned into a crash. Nonzero exit means the run itself broke.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "qmag/qmag.hpp"

using namespace qmag;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int passed = 0;
int failed = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = limit_s <= 0.0 || secs <= limit_s;
  const bool ok = o.pass && in_time;
  (ok ? passed : failed)++;
  std::string timing = limit_s > 0.0 ? fmt("%.2f s of %.0f s", secs, limit_s) : fmt("%.2f s", secs);
  if (!in_time) timing += ", over time limit";
  std::printf("criterion %2d: %s  %s: %s [%s]\n", id, ok ? "PASS" : "FAIL", name, o.detail.c_str(), timing.c_str());
  std::fflush(stdout);
}

double sup_rel_error(const SensingKernel& sim, const SensingKernel& theory) {
  double e = 0.0;
  for (std::size_t i = 0; i < sim.samples.size(); ++i)
    e = std::max(e, std::abs(sim.samples.values[i] - theory.samples.at(sim.samples.time(i))));
  return e / theory.samples.max_abs();
}

double peak_time(const std::vector<double>& t, const std::vector<double>& v) {
  std::size_t b = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[b])) b = i;
  if (b == 0 || b + 1 >= v.size()) return t[b];
  const double y0 = std::abs(v[b - 1]), y1 = std::abs(v[b]), y2 = std::abs(v[b + 1]);
  const double den = y0 - 2.0 * y1 + y2;
  return den == 0.0 ? t[b] : t[b] + 0.5 * (y0 - y2) / den * (t[b + 1] - t[b]);
}

double peak_time(const SampledWaveform& w) {
  std::vector<double> t(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) t[i] = w.time(i);
  return peak_time(t, w.values);
}

double rms_between(const std::vector<double>& a, const std::vector<double>& b, std::size_t skip) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = skip; i + skip < a.size(); ++i) {
    s += (a[i] - b[i]) * (a[i] - b[i]);
    ++n;
  }
  return std::sqrt(s / static_cast<double>(n));
}

SamplingPlan make_plan(double start, double end, double step, std::uint64_t seed, bool noisy = true) {
  SamplingPlan p;
  p.t_start = start;
  p.t_end = end;
  p.step = step;
  p.rng_seed = seed;
  p.shot_noise = noisy;
  return p;
}

ReadoutParams readout_with_counts(double c0) {
  ReadoutParams r;
  r.total_time = c0 * r.t_seq / (r.cw_rate * r.t_int);
  return r;
}

PulsePairSpec resonant_pulse(const NvParams& nv, double rabi_hz, double alpha) {
  return PulsePairSpec::from_alpha(two_pi * rabi_hz, alpha, nv.omega_minus());
}

// Quasi-energy splitting of the dressed {|0>, |-1>} pair over one carrier period.
double floquet_rabi(const NvParams& p, double rabi) {
  const double w = p.omega_minus();
  const double period = two_pi / w;
  const int n = 4000;
  const double dt = period / n;
  const double amp = std::sqrt(2.0) * rabi / p.gyromagnetic_ratio;
  Propagator u = Propagator::Identity();
  for (int i = 0; i < n; ++i) u = step_propagator(p, amp * std::cos(w * (i + 0.5) * dt), 0.0, dt) * u;
  Eigen::ComplexEigenSolver<Propagator> es(u);
  std::array<int, 3> idx{0, 1, 2};
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::norm(es.eigenvectors()(basis::plus, a)) < std::norm(es.eigenvectors()(basis::plus, b));
  });
  double d = std::abs(std::arg(es.eigenvalues()(idx[0])) - std::arg(es.eigenvalues()(idx[1])));
  d = std::min(d, two_pi - d);
  return d / period;
}

Outcome time_resolution_formula() {
  const PulsePairSpec spec = PulsePairSpec::from_alpha(two_pi * 125e6, units::deg(45.0), 0.0);
  const SensingKernel k = analytic_kernel(spec, 1e-12);
  const double sampled = time_resolution(k);
  const bool ok = std::abs(spec.duration - 2e-9) < 1e-18 && std::abs(k.t_min - 1.1e-9) <= 0.05e-9 &&
                  std::abs(sampled - k.t_min) <= 1e-12;
  return {ok, fmt("alpha 45 deg, tau %.3f ns: t_min %.4f ns closed form, %.4f ns from samples; target 1.1 +/- 0.05 ns",
                  spec.duration * 1e9, k.t_min * 1e9, sampled * 1e9)};
}

Outcome kernel_equivalence() {
  const NvParams nv;
  const PulsePairSpec spec = resonant_pulse(nv, 125e6, pi / 2);
  StimulusConfig stim;
  stim.grid_step = 10e-12;
  const SensingKernel sim = simulate_kernel(nv, pulse_pair(spec, 1e-12), stim, spec);
  const double err = sup_rel_error(sim, analytic_kernel(spec, stim.grid_step));
  // Same comparison at a weaker drive isolates the counter-rotating ripple.
  const PulsePairSpec weak = resonant_pulse(nv, 31.25e6, pi / 2);
  StimulusConfig coarse;
  coarse.grid_step = 50e-12;
  const double weak_err =
      sup_rel_error(simulate_kernel(nv, pulse_pair(weak, 1e-12), coarse, weak), analytic_kernel(weak, coarse.grid_step));
  return {err < 0.02, fmt("125 MHz, alpha 90 deg, dt 1 ps: sup error %.2f%% of peak (limit 2%%); "
                          "at 31.25 MHz the same error is %.2f%%",
                          100.0 * err, 100.0 * weak_err)};
}

Outcome distortion_broadening() {
  const NvParams nv;
  const PulsePairSpec spec = resonant_pulse(nv, 125e6, pi / 2);
  const double f3db = 1e9;
  StimulusConfig stim;
  stim.grid_step = 10e-12;
  const SampledWaveform ideal = pulse_pair(spec, 1e-12);
  const SampledWaveform padded = pulse_pair(spec, 1e-12, nv.gyromagnetic_ratio, 0.0, 8.0 / (two_pi * f3db));
  const SampledWaveform filtered = distort(padded, DistortionModel::low_pass(f3db, spec.carrier));
  const double w0 = time_resolution(simulate_kernel(nv, ideal, stim, spec));
  const double w1 = time_resolution(simulate_kernel(nv, filtered, stim, spec));
  const double rel = w1 / w0 - 1.0;
  return {rel >= 0.02, fmt("f3dB 1 GHz: FWHM %.4f ns -> %.4f ns, +%.2f%% (need >= 2%%)", w0 * 1e9, w1 * 1e9, 100.0 * rel)};
}

Outcome linearity_regime() {
  const NvParams nv;
  const PulsePairSpec spec = resonant_pulse(nv, 125e6, pi / 2);
  const SampledWaveform drive = pulse_pair(spec, 1e-12);
  StimulusConfig stim;
  stim.grid_step = 10e-12;
  const SensingKernel k = simulate_kernel(nv, drive, stim, spec);
  const SampledWaveform wall = domain_wall_transient(DomainWallScenario{}, TimeGrid{-30e-9, 30e-9, 10e-12});
  const SamplingPlan plan = make_plan(-10e-9, 10e-9, 50e-12, 1, false);
  // Scale the wall so that the accumulated phase gamma * int k B peaks at 0.045 rad.
  const MeasurementTrace unit = ideal_response(k, wall, plan);
  double phase = 0.0;
  for (double p : unit.p_values) phase = std::max(phase, std::abs(p - k.baseline) / std::abs(k.gain));
  const double scale = 0.045 / phase;
  SampledWaveform sig = wall;
  for (double& v : sig.values) v *= scale;
  const MeasurementTrace conv = ideal_response(k, sig, plan);
  const MeasurementTrace full = sample_trace(full_responder(nv, drive, sig), plan, ReadoutParams{}, 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < conv.size(); ++i) worst = std::max(worst, std::abs(full.p_values[i] - conv.p_values[i]));
  return {worst < 0.01, fmt("wall scaled x%.4f (peak %.1f uT, peak phase 0.045 rad): max |full - convolution| = %.2e "
                            "over %zu delays (limit 0.01)",
                            scale, 1e6 * sig.max_abs(), worst, conv.size())};
}

Outcome round_trip() {
  const SensingKernel k = analytic_kernel(PulsePairSpec{}, 10e-12);
  const SampledWaveform wall = domain_wall_transient(DomainWallScenario{}, TimeGrid{-30e-9, 30e-9, 10e-12});
  const double true_peak = peak_time(wall);
  const ReadoutParams readout;  // C0 = 2.4e5
  const Responder resp = ideal_responder(k, wall);
  const SamplingPlan plan = make_plan(-15e-9, 15e-9, 50e-12, 1);
  SamplingPlan quiet = plan;
  quiet.shot_noise = false;
  const MeasurementTrace noisy = sample_trace(resp, plan, readout, k.field_response());
  const MeasurementTrace clean = sample_trace(resp, quiet, readout, k.field_response());

  std::vector<double> widths, noises;
  double err = 0.0, bias = 0.0;
  for (double lambda : {0.2, 1.0, 5.0}) {
    WienerConfig cfg;
    cfg.lambda = lambda;
    const SampledWaveform rec = wiener_deconvolve(noisy, k, cfg);
    const SampledWaveform rec0 = wiener_deconvolve(clean, k, cfg);
    widths.push_back(time_resolution(rec0));
    const auto skip = static_cast<std::size_t>(cfg.taper_fraction * static_cast<double>(rec.size()));
    noises.push_back(rms_between(rec.values, rec0.values, skip));
    if (lambda == 0.2) {
      err = peak_time(rec) - true_peak;
      bias = peak_time(rec0) - true_peak;
    }
  }
  // Spread of the peak-position error over further noise realizations.
  double sum = 0.0, sum2 = 0.0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    SamplingPlan p = plan;
    p.rng_seed = 1000 + static_cast<std::uint64_t>(s);
    const double e = peak_time(wiener_deconvolve(sample_trace(resp, p, readout, k.field_response()), k, WienerConfig{})) - true_peak;
    sum += e;
    sum2 += e * e;
  }
  const double mean = sum / seeds;
  const double sd = std::sqrt(std::max(0.0, sum2 / seeds - mean * mean));
  const bool mono = widths[0] < widths[1] && widths[1] < widths[2] && noises[0] > noises[1] && noises[1] > noises[2];
  const bool ok = std::abs(err) < 0.2e-9 && mono;
  return {ok, fmt("lambda 0.2, seed 1: peak error %+.3f ns (limit 0.2 ns; noiseless %+.3f ns; %d seeds mean %+.3f "
                  "sd %.3f ns); FWHM %.2f/%.2f/%.2f ns, noise %.1f/%.1f/%.1f uT over lambda 0.2/1/5 (%s)",
                  err * 1e9, bias * 1e9, seeds, mean * 1e9, sd * 1e9, widths[0] * 1e9, widths[1] * 1e9,
                  widths[2] * 1e9, noises[0] * 1e6, noises[1] * 1e6, noises[2] * 1e6,
                  mono ? "monotone" : "not monotone")};
}

Outcome noise_floor() {
  const SensingKernel k = analytic_kernel(PulsePairSpec{}, 10e-12);
  const SampledWaveform zero(10e-12, -1e-9, std::vector<double>(201, 0.0), "T");
  const Responder resp = ideal_responder(k, zero);
  const ReadoutParams readout;
  double ss = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const MeasurementTrace tr = sample_trace(resp, make_plan(-5e-9, 5e-9, 50e-12, seed), readout, k.field_response());
    for (double f : tr.field_values) {
      ss += f * f;
      ++n;
    }
  }
  const double noise = std::sqrt(ss / static_cast<double>(n));
  return {noise >= 15e-6 && noise <= 60e-6,
          fmt("alpha 90 deg, tau 4 ns, eps 0.35, C0 %.3g, 1000 seeds: %.1f uT rms (window 15-60 uT)",
              readout.reference_counts(), noise * 1e6)};
}

Outcome tof_precision() {
  // Same setup as presets/fig4.yaml.
  const SensingKernel k = analytic_kernel(PulsePairSpec{}, 10e-12);
  const SampledWaveform base = smooth_pulse(0.5e-3, 0.0, 6e-9, 1e-9, TimeGrid{-30e-9, 40e-9, 5e-12});
  const ReadoutParams readout = readout_with_counts(6e6);
  const std::uint64_t seed = 11;
  const std::vector<double> delays{250e-12, 500e-12, 750e-12};
  const WienerConfig cfg;
  auto run = [&](std::uint64_t ref_seed, std::uint64_t first_seed, std::vector<ToFResult>& out) {
    const MeasurementTrace ref =
        sample_trace(ideal_responder(k, base), make_plan(-10e-9, 20e-9, 50e-12, ref_seed), readout, k.field_response());
    out.clear();
    for (std::size_t i = 0; i < delays.size(); ++i) {
      const MeasurementTrace tr = sample_trace(ideal_responder(k, shift(base, delays[i])),
                                               make_plan(-10e-9, 20e-9, 50e-12, first_seed + i), readout,
                                               k.field_response());
      out.push_back(estimate_tof(ref, tr, cfg));
    }
  };
  std::vector<ToFResult> res;
  run(seed, seed + 2, res);  // delay seeds follow the zero-delay copy in the preset
  bool ok = true;
  std::string detail = "C0 6e6, 0.5 mT pulse:";
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const double e = res[i].delay - delays[i];
    ok = ok && std::abs(e) <= 5e-12 && res[i].fit_uncertainty <= 5e-12;
    detail += fmt(" %.0f ps -> %.1f +/- %.1f ps (error %+.1f);", delays[i] * 1e12, res[i].delay * 1e12,
                  res[i].fit_uncertainty * 1e12, e * 1e12);
  }
  // Error statistics over independent realizations.
  const int reps = 100;
  double ss = 0.0, unc = 0.0;
  int within = 0;
  for (int r = 0; r < reps; ++r) {
    run(5000 + 10 * static_cast<std::uint64_t>(r), 5001 + 10 * static_cast<std::uint64_t>(r), res);
    for (std::size_t i = 0; i < delays.size(); ++i) {
      const double e = res[i].delay - delays[i];
      ss += e * e;
      unc += res[i].fit_uncertainty;
      within += std::abs(e) <= 5e-12 ? 1 : 0;
    }
  }
  const double total = reps * static_cast<double>(delays.size());
  detail += fmt(" over %d repetitions: rms error %.1f ps, mean fit uncertainty %.1f ps, %.0f%% within 5 ps", reps,
                1e12 * std::sqrt(ss / total), 1e12 * unc / total, 100.0 * within / total);
  return {ok, detail};
}

Outcome sensitivity_anchor() {
  const double gamma = constants::nv_gamma;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; b <= 4; ++b)
      for (int c = 0; c <= 4; ++c) {
        ReadoutParams r;
        r.contrast = 0.3 + 0.025 * a;
        r.cw_rate = 1e6 + 0.25e6 * b;
        r.t_int = 300e-9 + 50e-9 * c;
        r.t_seq = 2.5e-6;
        r.total_time = 1.0;
        const double bmin = min_detectable_field(pi / 2, 2e-9, r.contrast, gamma, r.reference_counts());
        lo = std::min(lo, bmin);
        hi = std::max(hi, bmin);
      }
  return {lo <= 35e-6 && 35e-6 <= hi, fmt("alpha 90 deg, tau 2 ns: B_min spans %.1f-%.1f uT/sqrt(Hz); 35 inside", lo * 1e6,
                                          hi * 1e6)};
}

Outcome property_suites() {
  std::vector<std::string> bad;
  const NvParams nv;

  // Unitarity under random piecewise-constant fields.
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 5e-3);
  std::vector<double> b1(20000), bz(20000);
  for (std::size_t i = 0; i < b1.size(); ++i) {
    b1[i] = g(rng);
    bz[i] = 0.1 * g(rng);
  }
  SpinState psi = basis_state(basis::zero);
  psi = propagate(psi, b1, bz, 1e-12, nv);
  const Propagator u = step_propagator(nv, 1e-2, 1e-3, 1e-12);
  const double unit_err = std::max(std::abs(psi.norm() - 1.0), (u.adjoint() * u - Propagator::Identity()).norm());
  if (unit_err > 1e-9) bad.push_back("unitarity");

  // Rabi frequency against the rotating-wave value at Omega/omega <= 0.07.
  const double rabi = two_pi * 125e6;
  const double rwa = std::abs(floquet_rabi(nv, rabi) / rabi - 1.0);
  if (!(rabi / nv.omega_minus() <= 0.07) || rwa > 0.01) bad.push_back("rabi");

  // Shot noise 1/sqrt(C0) over a decade.
  auto spread = [](double c0) {
    const Responder r{[](double) { return 0.8; }, 0.8, "const"};
    const ReadoutParams readout = readout_with_counts(c0);
    std::vector<double> p;
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) p.push_back(sample_trace(r, make_plan(0, 0, 1e-12, seed), readout, 0.0).p_values[0]);
    const double m = std::accumulate(p.begin(), p.end(), 0.0) / 1000.0;
    double s = 0.0;
    for (double x : p) s += (x - m) * (x - m);
    return std::sqrt(s / 999.0);
  };
  const double ratio = spread(2.4e4) / spread(2.4e5) / std::sqrt(10.0);
  if (std::abs(ratio - 1.0) > 0.1) bad.push_back("shot noise");

  // SNR = 1 at phi = gamma * B_min * tau, found by bisection.
  double worst = 0.0;
  for (double a : {0.3, 0.8, pi / 2, 2.2}) {
    const double tau = 3e-9;
    const double bmin = min_detectable_field(a, tau, 0.35, constants::nv_gamma, 2.4e5);
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (snr(mid, a, 0.35, 2.4e5) < 1.0 ? lo : hi) = mid;
    }
    worst = std::max(worst, std::abs(0.5 * (lo + hi) / (constants::nv_gamma * tau) / bmin - 1.0));
  }
  if (worst > 1e-12) bad.push_back("snr/b_min");

  // Reruns: identical bytes for traces and reconstructions.
  const SensingKernel k = analytic_kernel(PulsePairSpec{}, 10e-12);
  const SampledWaveform wall = domain_wall_transient(DomainWallScenario{}, TimeGrid{-30e-9, 30e-9, 10e-12});
  SamplingPlan plan = make_plan(-15e-9, 15e-9, 50e-12, 77);
  plan.trigger_jitter_rms = 20e-12;
  auto once = [&] {
    const MeasurementTrace tr = sample_trace(ideal_responder(k, wall), plan, ReadoutParams{}, k.field_response());
    std::vector<double> all = tr.p_values;
    const SampledWaveform rec = wiener_deconvolve(tr, k, WienerConfig{});
    all.insert(all.end(), rec.values.begin(), rec.values.end());
    return all;
  };
  const std::vector<double> r1 = once();
  const std::vector<double> r2 = once();
  const bool same = r1.size() == r2.size() && std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(double)) == 0;
  if (!same) bad.push_back("determinism");

  std::string detail = fmt("unitarity %.1e; Rabi vs RWA %.3f%%; noise ratio %.3f of sqrt(10); SNR/B_min %.1e; reruns %s",
                           unit_err, 100.0 * rwa, ratio, worst, same ? "identical" : "differ");
  if (!bad.empty()) {
    detail += "; failing:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty(), detail};
}

Outcome hardware_parameters() {
  // Hardware-tied numbers are not reproduced; they must be free inputs.
  const SensingKernel k = analytic_kernel(PulsePairSpec{}, 10e-12);
  const SampledWaveform wall = domain_wall_transient(DomainWallScenario{}, TimeGrid{-30e-9, 30e-9, 10e-12});
  SamplingPlan plan = make_plan(-5e-9, 5e-9, 50e-12, 3, false);
  const MeasurementTrace a = sample_trace(ideal_responder(k, wall), plan, ReadoutParams{}, k.field_response());
  plan.trigger_jitter_rms = 20e-12;
  const MeasurementTrace b = sample_trace(ideal_responder(k, wall), plan, ReadoutParams{}, k.field_response());
  ReadoutParams fast;
  fast.cw_rate = 2e6;
  PulsePairSpec spec;
  spec.carrier = NvParams{}.omega_minus();
  const SampledWaveform d1 = distort(pulse_pair(spec, 1e-12), DistortionModel::low_pass(1e9, spec.carrier));
  const SampledWaveform d2 = distort(pulse_pair(spec, 1e-12), DistortionModel::low_pass(2e9, spec.carrier));
  const bool ok = a.p_values != b.p_values && fast.reference_counts() != ReadoutParams{}.reference_counts() &&
                  d1.values != d2.values;
  return {ok, "excluded from reproduction; trigger jitter, count rate and excitation bandwidth are inputs "
              "(trigger_jitter_rms_s, cw_rate_hz, distortion f3db_hz) and each changes the simulation"};
}

}  // namespace

int main() {
  std::printf("qmag acceptance (%u worker threads)\n", worker_count());
  criterion(1, "time-resolution formula", 1, time_resolution_formula);
  criterion(2, "kernel equivalence", 60, kernel_equivalence);
  criterion(3, "distortion broadening", 60, distortion_broadening);
  criterion(4, "linearity regime", 120, linearity_regime);
  criterion(5, "round-trip reconstruction", 60, round_trip);
  criterion(6, "noise floor", 60, noise_floor);
  criterion(7, "time-of-flight precision", 60, tof_precision);
  criterion(8, "sensitivity anchor", 1, sensitivity_anchor);
  criterion(9, "property suites", 0, property_suites);
  criterion(10, "hardware-bound numbers", 0, hardware_parameters);
  std::printf("summary: %d passed, %d failed\n", passed, failed);
  return 0;
}
