// qmag: command-line front end. Exit codes: 0 ok, 2 configuration or
// input error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qmag/scenario.hpp"

namespace {

using namespace qmag;

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::ConfigError:
    case ErrorKind::IoError:
      return exit_config;
    default:
      return exit_numeric;
  }
}

struct ReadoutFlags {
  ReadoutParams r;
  double counts = 0.0;

  void add(CLI::App* app) {
    app->add_option("--contrast", r.contrast, "optical contrast epsilon");
    app->add_option("--cw-rate", r.cw_rate, "count rate I0 [1/s]");
    app->add_option("--t-int", r.t_int, "readout window [s]");
    app->add_option("--t-seq", r.t_seq, "sequence period [s]");
    app->add_option("--total-time", r.total_time, "integration time per point [s]");
    app->add_option("--counts", counts, "reference counts C0 (overrides --total-time)");
  }
  ReadoutParams get() const {
    ReadoutParams out = r;
    if (counts > 0.0) out.total_time = counts * r.t_seq / (r.cw_rate * r.t_int);
    return out;
  }
};

struct PulseFlags {
  double rabi_hz = 125e6;
  std::optional<double> tau;
  std::optional<double> alpha_deg;
  double phase_jump_deg = 90.0;

  void add(CLI::App* app) {
    app->add_option("--rabi-hz", rabi_hz, "Rabi frequency Omega/2pi [Hz]");
    app->add_option("--tau", tau, "pulse duration [s]");
    app->add_option("--alpha-deg", alpha_deg, "rotation angle [deg]");
    app->add_option("--phase-jump-deg", phase_jump_deg, "phase jump between P1 and P2 [deg]");
  }
  PulsePairSpec get(double carrier) const {
    PulsePairSpec s;
    s.rabi = units::hz_to_angular(rabi_hz);
    s.carrier = carrier;
    s.phase_jump = units::deg(phase_jump_deg);
    if (tau && alpha_deg) {
      const double implied = 0.5 * s.rabi * *tau;
      if (std::abs(implied - units::deg(*alpha_deg)) > 1e-6 * implied)
        throw Error(ErrorKind::ConfigError, "--alpha-deg, --rabi-hz and --tau are inconsistent (alpha = Omega tau / 2)");
    }
    if (tau) s.duration = *tau;
    else if (alpha_deg) s.duration = 2.0 * units::deg(*alpha_deg) / s.rabi;
    return s;
  }
};

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qmag: time-resolved NV magnetometry simulation and reconstruction"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run a full scenario from a config file");
  std::string run_config;
  std::optional<std::uint64_t> run_seed;
  std::string run_out;
  run->add_option("config", run_config, "scenario file")->required();
  run->add_option("--seed", run_seed, "override plan.rng_seed");
  run->add_option("--out", run_out, "override the output directory");

  // validate
  auto* val = app.add_subcommand("validate", "check a config file");
  std::string val_config;
  val->add_option("config", val_config, "scenario file")->required();

  // kernel
  auto* ker = app.add_subcommand("kernel", "compute a sensing kernel");
  PulseFlags ker_pulse;
  ker_pulse.add(ker);
  std::string ker_method = "analytic", ker_out = "kernel.csv";
  double ker_dt = 1e-12, ker_step = 10e-12, ker_f3db = 0.0, ker_bias = 0.036;
  ker->add_option("--method", ker_method, "analytic | simulated")->check(CLI::IsMember({"analytic", "simulated"}));
  ker->add_option("--dt", ker_dt, "propagation step [s]");
  ker->add_option("--step", ker_step, "kernel grid step [s]");
  ker->add_option("--f3db", ker_f3db, "single-pole distortion corner [Hz]; 0 = none");
  ker->add_option("--bias-field", ker_bias, "axial bias field [T]");
  ker->add_option("--out", ker_out, "output CSV");

  // waveform
  auto* wav = app.add_subcommand("waveform", "synthesize a test waveform");
  std::string wav_type = "domain_wall", wav_out = "signal.csv", wav_scope;
  double wav_start = -30e-9, wav_stop = 30e-9, wav_step = 10e-12, wav_standoff = 0.0, wav_velocity = 100.0;
  double wav_ms = 0.0, wav_amp = 0.5e-3, wav_on = 0.0, wav_off = 6e-9, wav_edge = 1e-9, wav_delay = 0.0, wav_tpv = 0.0;
  wav->add_option("--type", wav_type, "domain_wall | disk_reversal | pulse | scope")
      ->check(CLI::IsMember({"domain_wall", "disk_reversal", "pulse", "scope"}));
  wav->add_option("--start", wav_start, "grid start [s]");
  wav->add_option("--stop", wav_stop, "grid stop [s]");
  wav->add_option("--step", wav_step, "grid step [s]");
  wav->add_option("--standoff", wav_standoff, "NV standoff [m]");
  wav->add_option("--velocity", wav_velocity, "wall velocity [m/s]");
  wav->add_option("--ms", wav_ms, "surface magnetization [muB/nm^2]");
  wav->add_option("--amplitude", wav_amp, "pulse amplitude [T]");
  wav->add_option("--t-on", wav_on, "pulse start [s]");
  wav->add_option("--t-off", wav_off, "pulse end [s]");
  wav->add_option("--edge", wav_edge, "pulse edge constant [s]");
  wav->add_option("--delay", wav_delay, "shift the waveform by this delay [s]");
  wav->add_option("--scope-file", wav_scope, "scope export (time, volts)");
  wav->add_option("--tesla-per-volt", wav_tpv, "scope conversion factor [T/V]");
  wav->add_option("--out", wav_out, "output CSV");

  // measure
  auto* mea = app.add_subcommand("measure", "forward-model a measurement trace");
  std::string mea_kernel, mea_signal, mea_out = "trace.csv";
  SamplingPlan mea_plan;
  bool mea_noiseless = false;
  ReadoutFlags mea_readout;
  mea->add_option("--kernel", mea_kernel, "kernel CSV")->required();
  mea->add_option("--signal", mea_signal, "signal CSV")->required();
  mea->add_option("--t-start", mea_plan.t_start, "first sample [s]");
  mea->add_option("--t-end", mea_plan.t_end, "last sample [s]");
  mea->add_option("--step", mea_plan.step, "sampling step [s]");
  mea->add_option("--seed", mea_plan.rng_seed, "RNG seed");
  mea->add_option("--jitter", mea_plan.trigger_jitter_rms, "trigger jitter rms [s]");
  mea->add_option("--jitter-samples", mea_plan.jitter_samples, "jitter draws per point");
  mea->add_option("--display-filter", mea_plan.display_filter_tau, "zero-phase smoothing time [s]");
  mea->add_flag("--noiseless", mea_noiseless, "disable shot noise");
  mea_readout.add(mea);
  mea->add_option("--out", mea_out, "output CSV");

  // deconvolve
  auto* dec = app.add_subcommand("deconvolve", "Wiener-deconvolve a trace");
  std::string dec_trace, dec_kernel, dec_out = "recon.csv", dec_window = "taper";
  WienerConfig dec_cfg;
  dec->add_option("--trace", dec_trace, "trace CSV")->required();
  dec->add_option("--kernel", dec_kernel, "kernel CSV")->required();
  dec->add_option("--lambda", dec_cfg.lambda, "regularization (relative to max|K|)");
  dec->add_option("--padding", dec_cfg.fft_padding, "FFT padding factor (>= 2)");
  dec->add_option("--window", dec_window, "taper | none")->check(CLI::IsMember({"taper", "none"}));
  dec->add_option("--out", dec_out, "output CSV");

  // tof
  auto* tof = app.add_subcommand("tof", "estimate the delay of trace B relative to trace A");
  std::string tof_a, tof_b, tof_out;
  WienerConfig tof_cfg;
  tof->add_option("--a", tof_a, "reference trace CSV")->required();
  tof->add_option("--b", tof_b, "delayed trace CSV")->required();
  tof->add_option("--lambda", tof_cfg.lambda, "regularization (relative to max|A|)");
  tof->add_option("--padding", tof_cfg.fft_padding, "FFT padding factor (>= 2)");
  tof->add_option("--out", tof_out, "output JSON");

  // sensitivity
  auto* sen = app.add_subcommand("sensitivity", "shot-noise figures of merit");
  double sen_alpha_deg = 90.0, sen_tau = 2e-9, sen_rabi_hz = 125e6;
  std::vector<double> sen_curve;
  std::string sen_out;
  ReadoutFlags sen_readout;
  sen->add_option("--alpha-deg", sen_alpha_deg, "rotation angle [deg]");
  sen->add_option("--tau", sen_tau, "pulse duration [s]");
  sen->add_option("--curve", sen_curve, "angles [deg] for a trade-off curve at --rabi-hz");
  sen->add_option("--rabi-hz", sen_rabi_hz, "Rabi frequency for the curve [Hz]");
  sen_readout.add(sen);
  sen->add_option("--out", sen_out, "trade-off CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    if (*run) {
      ScenarioConfig cfg = parse_config(run_config);
      if (run_seed) cfg.plan.rng_seed = *run_seed;
      if (!run_out.empty()) cfg.outputs = run_out;
      const ScenarioReport rep = run_scenario(cfg);
      print_json(rep.metrics);
      std::cerr << "wrote " << rep.files.size() << " files to " << cfg.outputs.string() << "\n";
    } else if (*val) {
      const auto diags = validate_config(val_config);
      for (const auto& d : diags) std::cerr << d << "\n";
      if (!diags.empty()) return exit_config;
      std::cout << val_config << ": ok\n";
    } else if (*ker) {
      NvParams nv;
      nv.bias_field = ker_bias;
      const PulsePairSpec spec = ker_pulse.get(nv.omega_minus());
      SensingKernel k;
      json meta = {{"step", "kernel"}, {"nv", nv}, {"pulse", spec}, {"method", ker_method}};
      if (ker_method == "analytic" && ker_f3db <= 0.0) {
        k = analytic_kernel(spec, ker_step);
      } else {
        const double tail = ker_f3db > 0.0 ? 8.0 / (two_pi * ker_f3db) : 0.0;
        SampledWaveform drive = pulse_pair(spec, ker_dt, nv.gyromagnetic_ratio, 0.0, tail);
        if (ker_f3db > 0.0) {
          const auto model = DistortionModel::low_pass(ker_f3db, spec.carrier);
          drive = distort(drive, model);
          meta["distortion"] = model;
        }
        StimulusConfig stim;
        stim.grid_step = ker_step;
        k = simulate_kernel(nv, drive, stim, spec);
        meta["drive_dt_s"] = ker_dt;
      }
      io::write_kernel(ker_out, k, meta);
      print_json({{"t_min_s", time_resolution(k)}, {"t_min_analytic_s", k.t_min}, {"gain", k.gain}, {"baseline", k.baseline},
                  {"out", ker_out}});
    } else if (*wav) {
      const TimeGrid grid{wav_start, wav_stop, wav_step};
      SampledWaveform w;
      json meta = {{"step", "waveform"}, {"type", wav_type}};
      if (wav_type == "domain_wall") {
        DomainWallScenario s;
        if (wav_standoff > 0.0) s.standoff = wav_standoff;
        if (wav_ms > 0.0) s.surface_magnetization = units::bohr_per_nm2(wav_ms);
        s.velocity = wav_velocity;
        w = domain_wall_transient(s, grid);
        meta["scenario"] = s;
      } else if (wav_type == "disk_reversal") {
        DiskReversalScenario s;
        if (wav_standoff > 0.0) s.standoff = wav_standoff;
        if (wav_ms > 0.0) s.surface_magnetization = units::bohr_per_nm2(wav_ms);
        s.wall_velocity = wav_velocity;
        w = disk_reversal_transient(s, grid);
        meta["scenario"] = s;
      } else if (wav_type == "pulse") {
        w = smooth_pulse(wav_amp, wav_on, wav_off, wav_edge, grid);
        meta["scenario"] = {{"amplitude_t", wav_amp}, {"t_on_s", wav_on}, {"t_off_s", wav_off}, {"edge_s", wav_edge}};
      } else {
        if (wav_scope.empty() || !(wav_tpv > 0.0))
          throw Error(ErrorKind::ConfigError, "scope import needs --scope-file and a positive --tesla-per-volt");
        w = io::import_scope_trace(wav_scope, wav_tpv);
        meta["scenario"] = {{"scope_file", wav_scope}, {"tesla_per_volt", wav_tpv}};
      }
      if (wav_delay != 0.0) {
        w = shift(w, wav_delay);
        meta["delay_s"] = wav_delay;
      }
      io::write_waveform(wav_out, w, meta);
      print_json({{"peak_T", w.max_abs()}, {"samples", w.size()}, {"out", wav_out}});
    } else if (*mea) {
      const SensingKernel k = io::read_kernel(mea_kernel);
      const SampledWaveform signal = io::read_waveform(mea_signal);
      mea_plan.shot_noise = !mea_noiseless;
      const MeasurementTrace tr = sample_trace(ideal_responder(k, signal), mea_plan, mea_readout.get(), k.field_response());
      io::write_trace(mea_out, tr, {{"step", "measure"}, {"kernel", mea_kernel}, {"signal", mea_signal}});
      print_json({{"points", tr.size()}, {"reference_counts", mea_readout.get().reference_counts()}, {"out", mea_out}});
    } else if (*dec) {
      dec_cfg.taper = dec_window == "taper";
      const MeasurementTrace tr = io::read_trace(dec_trace);
      const SensingKernel k = io::read_kernel(dec_kernel);
      const SampledWaveform rec = wiener_deconvolve(tr, k, dec_cfg);
      io::write_waveform(dec_out, rec, {{"step", "deconvolve"}, {"trace", dec_trace}, {"kernel", dec_kernel}, {"recon", dec_cfg}});
      print_json({{"peak_T", rec.max_abs()}, {"out", dec_out}});
    } else if (*tof) {
      const ToFResult r = estimate_tof(io::read_trace(tof_a), io::read_trace(tof_b), tof_cfg);
      json j = r;
      if (!tof_out.empty())
        io::write_json(tof_out, {{"result", j}, {"a", tof_a}, {"b", tof_b}, {"recon", tof_cfg}});
      print_json(j);
    } else if (*sen) {
      const ReadoutParams r = sen_readout.get();
      r.validate();
      const double c0 = r.reference_counts();
      const double a = units::deg(sen_alpha_deg);
      const double b = min_detectable_field(a, sen_tau, r.contrast, constants::nv_gamma, c0);
      json j = {{"reference_counts", c0},
                {"alpha_rad", a},
                {"tau_s", sen_tau},
                {"t_min_s", analytic_time_resolution(sen_tau, a)},
                {"b_min_T", b},
                {"phi_min_rad", min_detectable_phase(a, r.contrast, c0)},
                {"snr_optimal_alpha_rad", snr_optimal_alpha(r.contrast)}};
      if (!sen_curve.empty()) {
        std::vector<double> alphas;
        for (double d : sen_curve) alphas.push_back(units::deg(d));
        const auto pts = tradeoff_curve(alphas, units::hz_to_angular(sen_rabi_hz), r.contrast, constants::nv_gamma, c0);
        const std::string path = sen_out.empty() ? "tradeoff.csv" : sen_out;
        io::write_tradeoff(path, pts, {{"step", "sensitivity"}, {"readout", r}, {"rabi_hz", sen_rabi_hz}});
        j["curve"] = path;
      }
      print_json(j);
    }
  } catch (const Error& e) {
    std::cerr << "qmag: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "qmag: " << e.what() << "\n";
    return exit_numeric;
  }
  return 0;
}
