#pragma once

// Scenario configuration files (YAML). Every diagnostic carries
// file:line:column and the dotted field path. Units are spelled out in the
// key names (_s, _hz, _deg, _t, _m).

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qmag/core.hpp"
#include "qmag/forward.hpp"
#include "qmag/kernels.hpp"
#include "qmag/recon.hpp"
#include "qmag/spin.hpp"
#include "qmag/waveforms.hpp"

namespace qmag {

enum class ScenarioMode { Kernel, Transient, ToF, Tradeoff };

inline const char* to_string(ScenarioMode m) {
  switch (m) {
    case ScenarioMode::Kernel: return "kernel";
    case ScenarioMode::Transient: return "transient";
    case ScenarioMode::ToF: return "tof";
    case ScenarioMode::Tradeoff: return "tradeoff";
  }
  return "transient";
}

struct KernelSettings {
  std::string method = "analytic";  // analytic | simulated
  double drive_dt = 1e-12;          // propagation step for simulated kernels
  double step = 10e-12;             // kernel grid step
  StimulusConfig stimulus;
};

struct SignalSettings {
  std::string type = "domain_wall";  // domain_wall | disk_reversal | pulse | file
  DomainWallScenario wall;
  DiskReversalScenario disk;
  double amplitude = 0.5e-3;  // pulse: T
  double t_on = 0.0;
  double t_off = 6e-9;
  double edge = 1e-9;
  std::filesystem::path file;
  double tesla_per_volt = 0.0;  // > 0: file is a scope export in volts
  TimeGrid grid{-30e-9, 30e-9, 10e-12};
};

struct TradeoffSettings {
  std::vector<double> alphas;  // rad
  double rabi = two_pi * 125e6;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ScenarioMode mode = ScenarioMode::Transient;
  NvParams nv;
  PulsePairSpec pulse;
  bool resonant_carrier = true;
  std::vector<double> alpha_sweep;  // rad, at fixed Rabi frequency
  KernelSettings kernel;
  DistortionModel distortion;
  std::filesystem::path impulse_file;
  SignalSettings signal;
  std::vector<double> delays;  // tof mode, s
  std::string responder = "ideal";
  SamplingPlan plan;
  ReadoutParams readout;
  WienerConfig recon;
  std::vector<double> lambdas;
  TradeoffSettings tradeoff;
  std::filesystem::path outputs = "out";
  std::filesystem::path source;
};

namespace config_detail {

class Diagnostics {
 public:
  explicit Diagnostics(std::string file) : file_(std::move(file)) {}

  void add(const YAML::Mark& m, const std::string& path, const std::string& msg) {
    std::string where = file_;
    if (m.line >= 0) where += ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
    items_.push_back(where + ": " + (path.empty() ? "" : path + ": ") + msg);
  }
  const std::vector<std::string>& items() const { return items_; }

 private:
  std::string file_;
  std::vector<std::string> items_;
};

/// One YAML mapping with key tracking, so unknown keys can be reported.
class Section {
 public:
  Section(YAML::Node node, std::string path, Diagnostics& diag) : node_(std::move(node)), path_(std::move(path)), diag_(&diag) {
    if (node_ && !node_.IsMap()) diag_->add(node_.Mark(), path_, "expected a mapping");
  }

  bool present() const { return node_ && node_.IsMap(); }
  bool has(const std::string& key) const { return present() && node_[key]; }
  YAML::Mark mark(const std::string& key) const {
    return has(key) ? node_[key].Mark() : (node_ ? node_.Mark() : YAML::Mark::null_mark());
  }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  Diagnostics& diag() { return *diag_; }

  Section sub(const std::string& key) {
    used_.insert(key);
    return Section(present() ? node_[key] : YAML::Node(), field(key), *diag_);
  }

  template <class T>
  bool get(const std::string& key, T& out) {
    used_.insert(key);
    if (!has(key)) return false;
    const YAML::Node n = node_[key];
    try {
      out = n.as<T>();
      return true;
    } catch (const YAML::Exception&) {
      diag_->add(n.Mark(), field(key), "cannot read value '" + (n.IsScalar() ? n.Scalar() : std::string("<node>")) + "'");
      return false;
    }
  }

  bool number(const std::string& key, double& out, double scale = 1.0) {
    double v = 0.0;
    if (!get(key, v)) return false;
    out = v * scale;
    return true;
  }

  bool numbers(const std::string& key, std::vector<double>& out, double scale = 1.0) {
    used_.insert(key);
    if (!has(key)) return false;
    const YAML::Node n = node_[key];
    if (!n.IsSequence()) {
      diag_->add(n.Mark(), field(key), "expected a list of numbers");
      return false;
    }
    out.clear();
    for (const auto& item : n) {
      try {
        out.push_back(item.as<double>() * scale);
      } catch (const YAML::Exception&) {
        diag_->add(item.Mark(), field(key), "cannot read list entry");
      }
    }
    return true;
  }

  void require_positive(const std::string& key, double v, const std::string& msg) {
    if (!(v > 0.0)) diag_->add(mark(key), field(key), msg);
  }

  void finish() {
    if (!present()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) diag_->add(kv.first.Mark(), field(key), "unknown key");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  Diagnostics* diag_;
  std::set<std::string> used_;
};

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

inline void read_grid(Section s, TimeGrid& g) {
  s.number("start_s", g.start);
  s.number("stop_s", g.stop);
  s.number("step_s", g.step);
  s.require_positive("step_s", g.step, "grid step must be positive");
  if (!(g.stop > g.start)) s.diag().add(s.mark("stop_s"), s.field("stop_s"), "grid stop must exceed start");
  s.finish();
}

inline void read_nv(Section s, NvParams& nv) {
  double f = 0.0;
  if (s.number("zero_field_splitting_hz", f)) nv.zero_field_splitting = units::hz_to_angular(f);
  if (s.number("gyromagnetic_ratio_hz_per_t", f)) nv.gyromagnetic_ratio = units::hz_to_angular(f);
  s.number("bias_field_t", nv.bias_field);
  s.number("axis_polar_deg", nv.axis_polar, pi / 180.0);
  s.number("axis_azimuth_deg", nv.axis_azimuth, pi / 180.0);
  s.require_positive("zero_field_splitting_hz", nv.zero_field_splitting, "zero-field splitting must be positive");
  s.require_positive("gyromagnetic_ratio_hz_per_t", nv.gyromagnetic_ratio, "gyromagnetic ratio must be positive");
  if (!(nv.omega_minus() > 0.0))
    s.diag().add(s.mark("bias_field_t"), s.field("bias_field_t"), "bias field closes the m_S = 0 <-> -1 gap");
  s.finish();
}

inline void read_pulse(Section s, ScenarioConfig& c) {
  double f = 0.0;
  const bool has_rabi = s.number("rabi_hz", f);
  if (has_rabi) c.pulse.rabi = units::hz_to_angular(f);
  const bool has_tau = s.number("duration_s", c.pulse.duration);
  double alpha = 0.0;
  const bool has_alpha = s.number("alpha_deg", alpha, pi / 180.0);
  s.number("phase_jump_deg", c.pulse.phase_jump, pi / 180.0);
  double phase = 0.0;
  if (s.number("initial_phase_deg", phase, pi / 180.0)) c.pulse.initial_phase = phase;
  std::string carrier;
  if (s.get("carrier_hz", carrier) && carrier != "resonant") {
    double hz = 0.0;
    if (s.number("carrier_hz", hz)) {
      c.resonant_carrier = false;
      c.pulse.carrier = units::hz_to_angular(hz);
    }
  }
  if (has_alpha && !(alpha > 0.0 && alpha <= pi))
    s.diag().add(s.mark("alpha_deg"), s.field("alpha_deg"), "rotation angle must lie in (0, 180] deg");
  if (has_alpha && has_rabi && has_tau) {
    const double implied = 0.5 * c.pulse.rabi * c.pulse.duration;
    if (std::abs(implied - alpha) > 1e-6 * alpha)
      s.diag().add(s.mark("alpha_deg"), s.field("alpha_deg"),
                   "alpha_deg, rabi_hz and duration_s are inconsistent: alpha must equal rabi * duration / 2 (" +
                       std::to_string(implied * 180.0 / pi) + " deg from " + s.field("rabi_hz") + " and " +
                       s.field("duration_s") + ")");
  } else if (has_alpha && has_rabi && alpha > 0.0) {
    c.pulse.duration = 2.0 * alpha / c.pulse.rabi;
  } else if (has_alpha && has_tau && alpha > 0.0) {
    c.pulse.rabi = 2.0 * alpha / c.pulse.duration;
  }
  s.require_positive("rabi_hz", c.pulse.rabi, "Rabi frequency must be positive");
  s.require_positive("duration_s", c.pulse.duration, "pulse duration must be positive");
  std::vector<double> sweep;
  if (s.numbers("alpha_sweep_deg", sweep, pi / 180.0)) {
    for (double a : sweep)
      if (!(a > 0.0 && a <= pi)) s.diag().add(s.mark("alpha_sweep_deg"), s.field("alpha_sweep_deg"), "angles must lie in (0, 180] deg");
    c.alpha_sweep = sweep;
  }
  s.finish();
}

inline void read_kernel(Section s, KernelSettings& k) {
  s.get("method", k.method);
  if (k.method != "analytic" && k.method != "simulated")
    s.diag().add(s.mark("method"), s.field("method"), "method must be 'analytic' or 'simulated'");
  s.number("drive_dt_s", k.drive_dt);
  s.number("step_s", k.step);
  s.number("stimulus_width_s", k.stimulus.width);
  double phase = 0.0;
  if (s.number("stimulus_phase_rad", phase)) k.stimulus.area = phase / constants::nv_gamma;
  s.get("linearity_guard", k.stimulus.linearity_guard);
  s.require_positive("drive_dt_s", k.drive_dt, "drive step must be positive");
  s.require_positive("step_s", k.step, "kernel step must be positive");
  s.finish();
}

inline void read_distortion(Section s, ScenarioConfig& c) {
  std::string kind = "none";
  s.get("kind", kind);
  double f = 1e9;
  s.number("f3db_hz", f);
  std::filesystem::path file;
  std::string text;
  if (s.get("impulse_file", text)) file = resolve(c.source.parent_path(), text);
  if (kind == "none") {
    c.distortion = DistortionModel::none();
  } else if (kind == "lowpass") {
    c.distortion = DistortionModel::low_pass(f);
    s.require_positive("f3db_hz", f, "corner frequency must be positive");
  } else if (kind == "measured") {
    c.distortion.kind = DistortionModel::Kind::Measured;
    c.impulse_file = file;
    if (file.empty()) s.diag().add(s.mark("kind"), s.field("impulse_file"), "measured distortion needs an impulse file");
    else if (!std::filesystem::exists(file))
      s.diag().add(s.mark("impulse_file"), s.field("impulse_file"), "file not found: " + file.string());
  } else {
    s.diag().add(s.mark("kind"), s.field("kind"), "kind must be none, lowpass or measured");
  }
  s.finish();
}

inline void read_signal(Section s, ScenarioConfig& c) {
  SignalSettings& g = c.signal;
  s.get("type", g.type);
  if (g.type == "domain_wall") {
    s.number("surface_magnetization_ub_per_nm2", g.wall.surface_magnetization, units::bohr_per_nm2(1.0));
    s.number("standoff_m", g.wall.standoff);
    s.number("velocity_m_per_s", g.wall.velocity);
    s.number("nv_polar_deg", g.wall.nv_polar, pi / 180.0);
    s.number("nv_azimuth_deg", g.wall.nv_azimuth, pi / 180.0);
    s.require_positive("standoff_m", g.wall.standoff, "standoff must be positive");
    s.require_positive("velocity_m_per_s", g.wall.velocity, "velocity must be positive");
  } else if (g.type == "disk_reversal") {
    auto& d = g.disk;
    s.number("diameter_m", d.diameter);
    s.number("surface_magnetization_ub_per_nm2", d.surface_magnetization, units::bohr_per_nm2(1.0));
    s.number("wall_velocity_m_per_s", d.wall_velocity);
    s.number("wall_width_m", d.wall_width);
    s.number("standoff_m", d.standoff);
    s.number("nv_polar_deg", d.nv_polar, pi / 180.0);
    s.number("nv_azimuth_deg", d.nv_azimuth, pi / 180.0);
    s.number("resolution_m", d.resolution);
    s.number("sweep_azimuth_deg", d.sweep_azimuth, pi / 180.0);
    s.get("chirality", d.chirality);
    s.get("check_convergence", d.check_convergence);
    s.require_positive("standoff_m", d.standoff, "standoff must be positive");
    s.require_positive("diameter_m", d.diameter, "diameter must be positive");
    s.require_positive("wall_width_m", d.wall_width, "wall width must be positive");
    s.require_positive("resolution_m", d.resolution, "resolution must be positive");
    if (d.chirality != 1 && d.chirality != -1) s.diag().add(s.mark("chirality"), s.field("chirality"), "chirality must be +1 or -1");
  } else if (g.type == "pulse") {
    s.number("amplitude_t", g.amplitude);
    s.number("t_on_s", g.t_on);
    s.number("t_off_s", g.t_off);
    s.number("edge_s", g.edge);
    s.require_positive("edge_s", g.edge, "edge time must be positive");
    if (!(g.t_off > g.t_on)) s.diag().add(s.mark("t_off_s"), s.field("t_off_s"), "pulse must end after it starts");
  } else if (g.type == "file") {
    std::string text;
    if (s.get("path", text)) g.file = resolve(c.source.parent_path(), text);
    s.number("tesla_per_volt", g.tesla_per_volt);
    if (g.file.empty()) s.diag().add(s.mark("type"), s.field("path"), "file signal needs a path");
    else if (!std::filesystem::exists(g.file)) s.diag().add(s.mark("path"), s.field("path"), "file not found: " + g.file.string());
  } else {
    s.diag().add(s.mark("type"), s.field("type"), "type must be domain_wall, disk_reversal, pulse or file");
  }
  if (s.has("grid")) read_grid(s.sub("grid"), g.grid);
  s.numbers("delays_s", c.delays);
  s.finish();
}

inline void read_plan(Section s, SamplingPlan& p) {
  s.number("t_start_s", p.t_start);
  s.number("t_end_s", p.t_end);
  s.number("step_s", p.step);
  s.number("trigger_jitter_rms_s", p.trigger_jitter_rms);
  s.get("jitter_samples", p.jitter_samples);
  s.get("rng_seed", p.rng_seed);
  s.get("shot_noise", p.shot_noise);
  s.number("min_counts", p.min_counts);
  s.number("display_filter_tau_s", p.display_filter_tau);
  s.require_positive("step_s", p.step, "sampling step must be positive");
  if (!(p.t_end > p.t_start)) s.diag().add(s.mark("t_end_s"), s.field("t_end_s"), "sampling window is empty");
  if (p.trigger_jitter_rms < 0.0) s.diag().add(s.mark("trigger_jitter_rms_s"), s.field("trigger_jitter_rms_s"), "jitter must be non-negative");
  if (p.jitter_samples < 1) s.diag().add(s.mark("jitter_samples"), s.field("jitter_samples"), "need at least one jitter sample");
  s.finish();
}

inline void read_readout(Section s, ReadoutParams& r) {
  s.number("contrast", r.contrast);
  s.number("cw_rate_hz", r.cw_rate);
  s.number("t_int_s", r.t_int);
  s.number("t_seq_s", r.t_seq);
  s.number("total_time_s", r.total_time);
  double c0 = 0.0;
  if (s.number("reference_counts", c0)) {
    if (c0 > 0.0) r.total_time = c0 * r.t_seq / (r.cw_rate * r.t_int);
    else s.diag().add(s.mark("reference_counts"), s.field("reference_counts"), "reference counts must be positive");
  }
  if (!(r.contrast > 0.0 && r.contrast < 1.0)) s.diag().add(s.mark("contrast"), s.field("contrast"), "contrast must lie in (0, 1)");
  s.require_positive("cw_rate_hz", r.cw_rate, "count rate must be positive");
  s.require_positive("t_int_s", r.t_int, "integration window must be positive");
  s.require_positive("t_seq_s", r.t_seq, "sequence time must be positive");
  s.require_positive("total_time_s", r.total_time, "total time must be positive");
  s.finish();
}

inline void read_recon(Section s, ScenarioConfig& c) {
  s.number("lambda", c.recon.lambda);
  s.numbers("lambdas", c.lambdas);
  s.number("fft_padding", c.recon.fft_padding);
  std::string window = "taper";
  if (s.get("window", window)) {
    if (window == "taper") c.recon.taper = true;
    else if (window == "none") c.recon.taper = false;
    else s.diag().add(s.mark("window"), s.field("window"), "window must be 'taper' or 'none'");
  }
  s.number("taper_fraction", c.recon.taper_fraction);
  s.get("subtract_baseline", c.recon.subtract_baseline);
  if (c.recon.lambda < 0.0) s.diag().add(s.mark("lambda"), s.field("lambda"), "lambda must be non-negative");
  for (double l : c.lambdas)
    if (l < 0.0) s.diag().add(s.mark("lambdas"), s.field("lambdas"), "lambda must be non-negative");
  if (!(c.recon.fft_padding >= 2.0)) s.diag().add(s.mark("fft_padding"), s.field("fft_padding"), "padding must be at least 2");
  s.finish();
}

inline void read_tradeoff(Section s, ScenarioConfig& c) {
  s.numbers("alphas_deg", c.tradeoff.alphas, pi / 180.0);
  double f = 0.0;
  if (s.number("rabi_hz", f)) c.tradeoff.rabi = units::hz_to_angular(f);
  for (double a : c.tradeoff.alphas)
    if (!(a > 0.0 && a <= 0.5 * pi + 1e-12))
      s.diag().add(s.mark("alphas_deg"), s.field("alphas_deg"), "trade-off angles must lie in (0, 90] deg");
  s.require_positive("rabi_hz", c.tradeoff.rabi, "Rabi frequency must be positive");
  s.finish();
}

}  // namespace config_detail

struct ConfigResult {
  ScenarioConfig config;
  std::vector<std::string> diagnostics;
  bool ok() const { return diagnostics.empty(); }
};

/// Parses and checks a scenario file without side effects.
inline ConfigResult load_config(const std::filesystem::path& path) {
  using namespace config_detail;
  ConfigResult r;
  r.config.source = path;
  Diagnostics diag(path.string());
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    r.diagnostics.push_back(path.string() + ": cannot open file");
    return r;
  } catch (const YAML::ParserException& e) {
    diag.add(e.mark, "", e.msg);
    r.diagnostics = diag.items();
    return r;
  }
  if (!root || !root.IsMap()) {
    r.diagnostics.push_back(path.string() + ": top level must be a mapping");
    return r;
  }

  ScenarioConfig& c = r.config;
  Section top(root, "", diag);
  top.get("name", c.name);
  std::string mode = "transient";
  top.get("mode", mode);
  if (mode == "kernel") c.mode = ScenarioMode::Kernel;
  else if (mode == "transient") c.mode = ScenarioMode::Transient;
  else if (mode == "tof") c.mode = ScenarioMode::ToF;
  else if (mode == "tradeoff") c.mode = ScenarioMode::Tradeoff;
  else diag.add(top.mark("mode"), "mode", "mode must be kernel, transient, tof or tradeoff");
  std::string out;
  if (top.get("outputs", out)) c.outputs = out;
  top.get("responder", c.responder);
  if (c.responder != "ideal" && c.responder != "full")
    diag.add(top.mark("responder"), "responder", "responder must be 'ideal' or 'full'");

  read_nv(top.sub("nv"), c.nv);
  read_pulse(top.sub("pulse"), c);
  if (c.resonant_carrier) c.pulse.carrier = c.nv.omega_minus();
  read_kernel(top.sub("kernel"), c.kernel);
  read_distortion(top.sub("distortion"), c);
  if (c.distortion.kind == DistortionModel::Kind::LowPass) c.distortion.carrier = c.pulse.carrier;
  read_signal(top.sub("signal"), c);
  read_plan(top.sub("plan"), c.plan);
  read_readout(top.sub("readout"), c.readout);
  read_recon(top.sub("recon"), c);
  read_tradeoff(top.sub("tradeoff"), c);
  top.finish();

  if (c.mode == ScenarioMode::ToF && c.delays.empty())
    diag.add(top.mark("signal"), "signal.delays_s", "tof mode needs at least one delay");
  if (c.mode == ScenarioMode::Tradeoff && c.tradeoff.alphas.empty())
    diag.add(top.mark("tradeoff"), "tradeoff.alphas_deg", "tradeoff mode needs an angle grid");
  if (c.kernel.method == "simulated" && c.kernel.drive_dt * c.pulse.carrier >= 0.5)
    diag.add(top.mark("kernel"), "kernel.drive_dt_s", "drive step too coarse for the carrier (dt * omega >= 0.5)");
  r.diagnostics = diag.items();
  return r;
}

/// Returns the parsed configuration or throws ConfigError listing every diagnostic.
inline ScenarioConfig parse_config(const std::filesystem::path& path) {
  ConfigResult r = load_config(path);
  if (!r.ok()) {
    std::string msg;
    for (const auto& d : r.diagnostics) msg += "\n  " + d;
    throw Error(ErrorKind::ConfigError, "invalid configuration:" + msg);
  }
  return r.config;
}

inline std::vector<std::string> validate_config(const std::filesystem::path& path) { return load_config(path).diagnostics; }

}  // namespace qmag
