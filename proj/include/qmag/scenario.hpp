#pragma once

// End-to-end scenario runner: kernel → waveform → forward model →
// reconstruction → metrics, with every intermediate written to disk.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "qmag/config.hpp"
#include "qmag/io.hpp"
#include "qmag/sensitivity.hpp"

namespace qmag {

struct ScenarioReport {
  json metrics = json::object();
  std::vector<std::filesystem::path> files;
};

namespace scenario_detail {

inline std::string tag(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  std::string s = buf;
  for (char& ch : s)
    if (ch == '.') ch = 'p';
  return s;
}

inline json describe(const ScenarioConfig& c) {
  json j = {{"name", c.name},
            {"mode", to_string(c.mode)},
            {"source", c.source.string()},
            {"nv", c.nv},
            {"pulse", c.pulse},
            {"distortion", c.distortion},
            {"responder", c.responder},
            {"plan", c.plan},
            {"readout", c.readout},
            {"recon", c.recon},
            {"kernel", {{"method", c.kernel.method},
                        {"drive_dt_s", c.kernel.drive_dt},
                        {"step_s", c.kernel.step},
                        {"stimulus_width_s", c.kernel.stimulus.width},
                        {"stimulus_phase_rad", c.kernel.stimulus.phase(c.nv.gyromagnetic_ratio)}}}};
  if (!c.alpha_sweep.empty()) j["alpha_sweep_rad"] = c.alpha_sweep;
  if (!c.lambdas.empty()) j["lambdas"] = c.lambdas;
  if (!c.delays.empty()) j["delays_s"] = c.delays;
  if (c.signal.type == "domain_wall") j["signal"] = c.signal.wall;
  else if (c.signal.type == "disk_reversal") j["signal"] = c.signal.disk;
  else if (c.signal.type == "pulse")
    j["signal"] = {{"type", "pulse"},
                   {"amplitude_t", c.signal.amplitude},
                   {"t_on_s", c.signal.t_on},
                   {"t_off_s", c.signal.t_off},
                   {"edge_s", c.signal.edge}};
  else j["signal"] = {{"type", "file"}, {"path", c.signal.file.string()}, {"tesla_per_volt", c.signal.tesla_per_volt}};
  j["signal"]["grid"] = {{"start_s", c.signal.grid.start}, {"stop_s", c.signal.grid.stop}, {"step_s", c.signal.grid.step}};
  return j;
}

/// Drive waveform with enough trailing time for a filter ringdown.
inline SampledWaveform make_drive(const ScenarioConfig& c, const PulsePairSpec& spec, bool distorted) {
  const bool lp = distorted && c.distortion.kind == DistortionModel::Kind::LowPass;
  const double tail = lp ? 8.0 / (two_pi * c.distortion.f3db) : 0.0;
  SampledWaveform drive = pulse_pair(spec, c.kernel.drive_dt, c.nv.gyromagnetic_ratio, 0.0, tail);
  if (!distorted || c.distortion.kind == DistortionModel::Kind::None) return drive;
  DistortionModel model = c.distortion;
  if (model.kind == DistortionModel::Kind::Measured) {
    SampledWaveform taps = io::read_waveform(c.impulse_file);
    taps.unit = "1";
    model.impulse = taps;
    drive = pad_after(drive, taps.t_end() - taps.t0);
  }
  return distort(drive, model);
}

inline SensingKernel make_kernel(const ScenarioConfig& c, const PulsePairSpec& spec, bool distorted) {
  if (c.kernel.method == "analytic" && !(distorted && c.distortion.kind != DistortionModel::Kind::None))
    return analytic_kernel(spec, c.kernel.step);
  StimulusConfig stim = c.kernel.stimulus;
  stim.grid_step = c.kernel.step;
  return simulate_kernel(c.nv, make_drive(c, spec, distorted), stim, spec);
}

inline SampledWaveform make_signal(const ScenarioConfig& c) {
  const SignalSettings& s = c.signal;
  if (s.type == "domain_wall") return domain_wall_transient(s.wall, s.grid);
  if (s.type == "disk_reversal") return disk_reversal_transient(s.disk, s.grid);
  if (s.type == "pulse") return smooth_pulse(s.amplitude, s.t_on, s.t_off, s.edge, s.grid);
  if (s.tesla_per_volt > 0.0) return io::import_scope_trace(s.file, s.tesla_per_volt);
  return io::read_waveform(s.file);
}

inline Responder make_responder(const ScenarioConfig& c, const SensingKernel& k, const PulsePairSpec& spec,
                                const SampledWaveform& signal) {
  if (c.responder == "full") return full_responder(c.nv, make_drive(c, spec, true), signal);
  return ideal_responder(k, signal);
}

/// Peak of |w| refined by a parabola through the three top samples.
inline double peak_time(const std::vector<double>& t, const std::vector<double>& v) {
  std::size_t b = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[b])) b = i;
  if (b == 0 || b + 1 >= v.size()) return t[b];
  const double y0 = std::abs(v[b - 1]), y1 = std::abs(v[b]), y2 = std::abs(v[b + 1]);
  const double den = y0 - 2.0 * y1 + y2;
  return den == 0.0 ? t[b] : t[b] + 0.5 * (y0 - y2) / den * (t[b + 1] - t[b]);
}

inline double peak_time(const SampledWaveform& w) {
  std::vector<double> t(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) t[i] = w.time(i);
  return peak_time(t, w.values);
}

/// RMS of (noisy − clean), skipping `skip` of each end.
inline double noise_rms(const std::vector<double>& noisy, const std::vector<double>& clean, double skip = 0.0) {
  const auto m = static_cast<std::size_t>(skip * static_cast<double>(noisy.size()));
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = m; i + m < noisy.size(); ++i) {
    const double d = noisy[i] - clean[i];
    ss += d * d;
    ++n;
  }
  return n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
}

inline double fwhm_or_nan(const SampledWaveform& w) {
  try {
    return time_resolution(w);
  } catch (const Error&) {
    return std::nan("");
  }
}

inline SampledWaveform field_waveform(const MeasurementTrace& tr) {
  return SampledWaveform(tr.step(), tr.times.front(), tr.field_values, "T");
}

}  // namespace scenario_detail

inline ScenarioReport run_scenario(const ScenarioConfig& c) {
  using namespace scenario_detail;
  namespace fs = std::filesystem;
  ScenarioReport rep;
  const json cfg = describe(c);
  auto out = [&](const std::string& name) {
    const fs::path p = c.outputs / name;
    rep.files.push_back(p);
    return p;
  };
  auto meta = [&](const std::string& step) { return json{{"step", step}, {"scenario", cfg}}; };
  rep.metrics["scenario"] = c.name;
  rep.metrics["mode"] = to_string(c.mode);

  switch (c.mode) {
    case ScenarioMode::Kernel: {
      const SensingKernel ideal_theory = analytic_kernel(c.pulse, c.kernel.step);
      io::write_kernel(out("kernel_analytic.csv"), ideal_theory, meta("kernel"));
      json m = {{"t_min_analytic_s", ideal_theory.t_min}};
      if (c.kernel.method == "simulated" || c.distortion.kind != DistortionModel::Kind::None) {
        io::write_waveform(out("drive_ideal.csv"), make_drive(c, c.pulse, false), meta("drive"));
        ScenarioConfig sim = c;
        sim.kernel.method = "simulated";
        const SensingKernel ideal = make_kernel(sim, c.pulse, false);
        io::write_kernel(out("kernel_ideal.csv"), ideal, meta("kernel"));
        m["t_min_ideal_s"] = time_resolution(ideal);
        double err = 0.0;
        for (std::size_t i = 0; i < ideal.samples.size(); ++i)
          err = std::max(err, std::abs(ideal.samples.values[i] - ideal_theory.samples.at(ideal.samples.time(i))));
        m["sup_error_vs_analytic"] = err / ideal_theory.samples.max_abs();
        if (c.distortion.kind != DistortionModel::Kind::None) {
          io::write_waveform(out("drive_distorted.csv"), make_drive(c, c.pulse, true), meta("drive"));
          const SensingKernel dist = make_kernel(sim, c.pulse, true);
          io::write_kernel(out("kernel_distorted.csv"), dist, meta("kernel"));
          m["t_min_distorted_s"] = time_resolution(dist);
          m["broadening"] = time_resolution(dist) / time_resolution(ideal) - 1.0;
        }
      }
      rep.metrics["kernel"] = m;
      break;
    }

    case ScenarioMode::Transient: {
      const SampledWaveform signal = make_signal(c);
      io::write_waveform(out("signal.csv"), signal, meta("waveform"));
      rep.metrics["input_peak_time_s"] = peak_time(signal);
      rep.metrics["input_peak_T"] = signal.max_abs();
      rep.metrics["input_fwhm_s"] = fwhm_or_nan(signal);
      const std::vector<double> alphas = c.alpha_sweep.empty() ? std::vector<double>{c.pulse.alpha()} : c.alpha_sweep;
      const std::vector<double> lambdas = c.lambdas.empty() ? std::vector<double>{c.recon.lambda} : c.lambdas;
      json runs = json::array();
      for (double alpha : alphas) {
        PulsePairSpec spec = c.pulse;
        spec.duration = 2.0 * alpha / spec.rabi;
        const std::string at = "a" + tag(alpha * 180.0 / pi);
        const SensingKernel k = make_kernel(c, spec, true);
        io::write_kernel(out("kernel_" + at + ".csv"), k, meta("kernel"));
        const Responder resp = make_responder(c, k, spec, signal);
        const MeasurementTrace noisy = sample_trace(resp, c.plan, c.readout, k.field_response());
        SamplingPlan quiet = c.plan;
        quiet.shot_noise = false;
        quiet.trigger_jitter_rms = 0.0;
        const MeasurementTrace clean = sample_trace(resp, quiet, c.readout, k.field_response());
        io::write_trace(out("trace_" + at + ".csv"), noisy, meta("measure"));
        json run = {{"alpha_rad", alpha},
                    {"tau_s", spec.duration},
                    {"t_min_s", k.t_min},
                    {"trace_peak_time_s", peak_time(noisy.times, noisy.field_values)},
                    {"trace_fwhm_s", fwhm_or_nan(field_waveform(clean))},
                    {"trace_noise_rms_T", noise_rms(noisy.field_values, clean.field_values)}};
        json recs = json::array();
        for (double lam : lambdas) {
          WienerConfig wc = c.recon;
          wc.lambda = lam;
          const SampledWaveform rec = wiener_deconvolve(noisy, k, wc);
          const SampledWaveform rec0 = wiener_deconvolve(clean, k, wc);
          json rm = meta("deconvolve");
          rm["lambda"] = lam;
          rm["kernel"] = "kernel_" + at + ".csv";
          io::write_waveform(out("recon_" + at + "_l" + tag(lam) + ".csv"), rec, rm);
          recs.push_back({{"lambda", lam},
                          {"peak_time_s", peak_time(rec)},
                          {"peak_T", rec.max_abs()},
                          {"fwhm_s", fwhm_or_nan(rec0)},
                          {"noise_rms_T", noise_rms(rec.values, rec0.values, wc.taper ? wc.taper_fraction : 0.0)}});
        }
        run["reconstructions"] = recs;
        runs.push_back(run);
      }
      rep.metrics["runs"] = runs;
      break;
    }

    case ScenarioMode::ToF: {
      const SampledWaveform base = make_signal(c);
      const SensingKernel k = make_kernel(c, c.pulse, true);
      io::write_kernel(out("kernel.csv"), k, meta("kernel"));
      io::write_waveform(out("signal.csv"), base, meta("waveform"));
      SamplingPlan plan = c.plan;
      const MeasurementTrace ref = sample_trace(make_responder(c, k, c.pulse, base), plan, c.readout, k.field_response());
      io::write_trace(out("trace_ref.csv"), ref, meta("measure"));
      json results = json::array();
      for (std::size_t i = 0; i < c.delays.size(); ++i) {
        const double d = c.delays[i];
        const SampledWaveform moved = shift(base, d);
        plan.rng_seed = c.plan.rng_seed + i + 1;
        const MeasurementTrace tr = sample_trace(make_responder(c, k, c.pulse, moved), plan, c.readout, k.field_response());
        const std::string name = "trace_d" + tag(d * 1e12) + "ps.csv";
        io::write_trace(out(name), tr, meta("measure"));
        const ToFResult r = estimate_tof(ref, tr, c.recon);
        json rj = r;
        rj["nominal_s"] = d;
        rj["error_s"] = r.delay - d;
        rj["trace"] = name;
        results.push_back(rj);
      }
      io::write_json(out("tof.json"), {{"results", results}, {"scenario", cfg}});
      rep.metrics["tof"] = results;
      break;
    }

    case ScenarioMode::Tradeoff: {
      const double c0 = c.readout.reference_counts();
      const auto pts = tradeoff_curve(c.tradeoff.alphas, c.tradeoff.rabi, c.readout.contrast, c.nv.gyromagnetic_ratio, c0);
      io::write_tradeoff(out("tradeoff.csv"), pts, meta("sensitivity"));
      rep.metrics["reference_counts"] = c0;
      rep.metrics["snr_optimal_alpha_rad"] = snr_optimal_alpha(c.readout.contrast);
      rep.metrics["points"] = pts.size();
      rep.metrics["shortest_t_min_s"] = pts.front().t_min;
      rep.metrics["b_min_at_shortest_t_min_T"] = pts.front().b_min;
      rep.metrics["longest_t_min_s"] = pts.back().t_min;
      rep.metrics["b_min_at_longest_t_min_T"] = pts.back().b_min;
      break;
    }
  }

  io::write_json(out("metrics.json"), rep.metrics);
  return rep;
}

}  // namespace qmag
