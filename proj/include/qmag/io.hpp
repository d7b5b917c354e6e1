#pragma once

// CSV data files with JSON sidecars. Every table `name.csv` has a
// companion `name.json` holding units and the parameters that produced it.
// Files are written to a temporary name and renamed into place.

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qmag/core.hpp"
#include "qmag/forward.hpp"
#include "qmag/kernels.hpp"
#include "qmag/recon.hpp"
#include "qmag/sensitivity.hpp"
#include "qmag/spin.hpp"
#include "qmag/waveforms.hpp"

namespace qmag {

using json = nlohmann::json;

// Parameter serialization (ADL hooks for nlohmann::json).

inline void to_json(json& j, const NvParams& p) {
  j = {{"zero_field_splitting_hz", units::angular_to_hz(p.zero_field_splitting)},
       {"gyromagnetic_ratio_hz_per_t", units::angular_to_hz(p.gyromagnetic_ratio)},
       {"bias_field_t", p.bias_field},
       {"axis_polar_rad", p.axis_polar},
       {"axis_azimuth_rad", p.axis_azimuth}};
}

inline void to_json(json& j, const PulsePairSpec& s) {
  j = {{"rabi_hz", units::angular_to_hz(s.rabi)},
       {"duration_s", s.duration},
       {"carrier_hz", units::angular_to_hz(s.carrier)},
       {"phase_jump_rad", s.phase_jump},
       {"alpha_rad", s.alpha()}};
  if (s.initial_phase) j["initial_phase_rad"] = *s.initial_phase;
}

inline void to_json(json& j, const DistortionModel& m) {
  j = {{"kind", to_string(m.kind)}};
  if (m.kind == DistortionModel::Kind::LowPass) {
    j["f3db_hz"] = m.f3db;
    j["carrier_hz"] = units::angular_to_hz(m.carrier);
  }
  if (m.kind == DistortionModel::Kind::Measured && m.impulse) j["taps"] = m.impulse->size();
}

inline void to_json(json& j, const ReadoutParams& r) {
  j = {{"contrast", r.contrast},       {"cw_rate_hz", r.cw_rate},         {"t_int_s", r.t_int},
       {"t_seq_s", r.t_seq},           {"total_time_s", r.total_time},    {"reference_counts", r.reference_counts()}};
}

inline void to_json(json& j, const SamplingPlan& p) {
  j = {{"t_start_s", p.t_start},
       {"t_end_s", p.t_end},
       {"step_s", p.step},
       {"trigger_jitter_rms_s", p.trigger_jitter_rms},
       {"jitter_samples", p.jitter_samples},
       {"rng_seed", p.rng_seed},
       {"shot_noise", p.shot_noise},
       {"min_counts", p.min_counts},
       {"display_filter_tau_s", p.display_filter_tau}};
}

inline void from_json(const json& j, ReadoutParams& r) {
  r.contrast = j.value("contrast", r.contrast);
  r.cw_rate = j.value("cw_rate_hz", r.cw_rate);
  r.t_int = j.value("t_int_s", r.t_int);
  r.t_seq = j.value("t_seq_s", r.t_seq);
  r.total_time = j.value("total_time_s", r.total_time);
}

inline void from_json(const json& j, SamplingPlan& p) {
  p.t_start = j.value("t_start_s", p.t_start);
  p.t_end = j.value("t_end_s", p.t_end);
  p.step = j.value("step_s", p.step);
  p.trigger_jitter_rms = j.value("trigger_jitter_rms_s", p.trigger_jitter_rms);
  p.jitter_samples = j.value("jitter_samples", p.jitter_samples);
  p.rng_seed = j.value("rng_seed", p.rng_seed);
  p.shot_noise = j.value("shot_noise", p.shot_noise);
  p.min_counts = j.value("min_counts", p.min_counts);
  p.display_filter_tau = j.value("display_filter_tau_s", p.display_filter_tau);
}

inline void to_json(json& j, const WienerConfig& c) {
  j = {{"lambda", c.lambda},
       {"fft_padding", c.fft_padding},
       {"window", c.taper ? "taper" : "none"},
       {"taper_fraction", c.taper_fraction},
       {"subtract_baseline", c.subtract_baseline}};
}

inline void to_json(json& j, const DomainWallScenario& s) {
  j = {{"type", "domain_wall"},
       {"surface_magnetization_a", s.surface_magnetization},
       {"standoff_m", s.standoff},
       {"velocity_m_per_s", s.velocity},
       {"nv_polar_rad", s.nv_polar},
       {"nv_azimuth_rad", s.nv_azimuth}};
}

inline void to_json(json& j, const DiskReversalScenario& s) {
  j = {{"type", "disk_reversal"},
       {"diameter_m", s.diameter},
       {"surface_magnetization_a", s.surface_magnetization},
       {"wall_velocity_m_per_s", s.wall_velocity},
       {"wall_width_m", s.wall_width},
       {"standoff_m", s.standoff},
       {"nv_polar_rad", s.nv_polar},
       {"nv_azimuth_rad", s.nv_azimuth},
       {"resolution_m", s.resolution},
       {"sweep_azimuth_rad", s.sweep_azimuth},
       {"chirality", s.chirality}};
}

inline void to_json(json& j, const ToFResult& r) {
  j = {{"delay_s", r.delay},
       {"uncertainty_s", r.fit_uncertainty},
       {"peak_amplitude", r.peak_amplitude},
       {"peak_snr", r.peak_snr},
       {"sinc_width_s", r.sinc_width}};
}

namespace io {

/// Column-major numeric table.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;

  std::size_t rows() const { return data.empty() ? 0 : data.front().size(); }

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return data[i];
    throw Error(ErrorKind::IoError, "missing column '" + name + "'");
  }
  bool has(const std::string& name) const {
    for (const auto& c : columns)
      if (c == name) return true;
    return false;
  }
};

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out.flush()) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot rename into " + path.string() + ": " + ec.message());
}

inline void write_json(const std::filesystem::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IoError, path.string() + ": " + e.what());
  }
}

/// Writes the CSV and its sidecar; the sidecar gains "columns" and "rows".
inline void write_table(const std::filesystem::path& path, const Table& t, json meta = json::object()) {
  for (const auto& c : t.data)
    if (c.size() != t.rows()) throw Error(ErrorKind::IoError, "ragged table for " + path.string());
  std::string s;
  for (std::size_t c = 0; c < t.columns.size(); ++c) s += (c ? "," : "") + t.columns[c];
  s += '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (c) s += ',';
      s += format_number(t.data[c][r]);
    }
    s += '\n';
  }
  meta["columns"] = t.columns;
  meta["rows"] = t.rows();
  atomic_write(path, s);
  write_json(sidecar_path(path), meta);
}

/// Reads a header-first CSV; blank lines and lines starting with '#' are skipped.
inline Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  Table t;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!header) {
      t.columns = cells;
      t.data.assign(cells.size(), {});
      header = true;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw Error(ErrorKind::IoError, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                          std::to_string(t.columns.size()) + " fields");
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const char* first = cells[c].data();
      const char* last = first + cells[c].size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last)
        throw Error(ErrorKind::IoError, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cells[c] + "'");
      t.data[c].push_back(v);
    }
  }
  if (!header) throw Error(ErrorKind::IoError, path.string() + ": empty file");
  return t;
}

inline json read_sidecar(const std::filesystem::path& csv) {
  const auto p = sidecar_path(csv);
  return std::filesystem::exists(p) ? read_json(p) : json::object();
}

/// Uniform grid check on a time column; returns the step.
inline double uniform_step(const std::vector<double>& t, double rel_tol, const std::string& what) {
  if (t.size() < 2) throw Error(ErrorKind::IoError, what + ": need at least two samples");
  const double step = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(step > 0.0)) throw Error(ErrorKind::IoError, what + ": time must increase");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs(t[i] - t[i - 1] - step) > rel_tol * step) throw Error(ErrorKind::GridMismatch, what + ": non-uniform time grid");
  return step;
}

inline Table waveform_table(const SampledWaveform& w, const std::string& value_column) {
  Table t{{"time_s", value_column}, {std::vector<double>(w.size()), w.values}};
  for (std::size_t i = 0; i < w.size(); ++i) t.data[0][i] = w.time(i);
  return t;
}

inline void write_waveform(const std::filesystem::path& path, const SampledWaveform& w, json meta = json::object()) {
  meta["unit"] = w.unit;
  meta["dt_s"] = w.dt;
  meta["t0_s"] = w.t0;
  write_table(path, waveform_table(w, w.unit == "T" ? "field_T" : "value"), std::move(meta));
}

/// Reads time plus one value column (the second, unless named) and scales the values.
inline SampledWaveform read_waveform(const std::filesystem::path& path, const std::string& column = "",
                                     double scale = 1.0) {
  const Table t = read_table(path);
  if (t.columns.size() < 2) throw Error(ErrorKind::IoError, path.string() + ": need time and value columns");
  const auto& time = t.data[0];
  const auto& v = column.empty() ? t.data[1] : t.column(column);
  const double step = uniform_step(time, 1e-6, path.string());
  SampledWaveform w(step, time.front(), v);
  for (double& x : w.values) x *= scale;
  const json meta = read_sidecar(path);
  w.unit = meta.value("unit", std::string("T"));
  return w;
}

/// Oscilloscope export: time and voltage columns, converted with a fixed
/// volts-to-tesla factor. Scope timestamps are often printed with few
/// digits, so the grid check is loose and the step is the mean spacing.
inline SampledWaveform import_scope_trace(const std::filesystem::path& path, double tesla_per_volt) {
  const Table t = read_table(path);
  if (t.columns.size() < 2) throw Error(ErrorKind::IoError, path.string() + ": need time and voltage columns");
  const double step = uniform_step(t.data[0], 1e-2, path.string());
  SampledWaveform w(step, t.data[0].front(), t.data[1], "T");
  for (double& x : w.values) x *= tesla_per_volt;
  return w;
}

inline void write_kernel(const std::filesystem::path& path, const SensingKernel& k, json meta = json::object()) {
  meta["tau_s"] = k.tau;
  meta["alpha_rad"] = k.alpha;
  meta["rabi_hz"] = units::angular_to_hz(k.rabi);
  meta["t_min_s"] = k.t_min;
  meta["bandwidth_hz"] = k.bandwidth;
  meta["gain"] = k.gain;
  meta["baseline"] = k.baseline;
  meta["gamma_hz_per_t"] = units::angular_to_hz(k.gamma);
  meta["origin"] = k.origin;
  meta["unit"] = "1";
  meta["dt_s"] = k.samples.dt;
  meta["t0_s"] = k.samples.t0;
  write_table(path, waveform_table(k.samples, "k"), std::move(meta));
}

inline SensingKernel read_kernel(const std::filesystem::path& path) {
  const json meta = read_sidecar(path);
  if (meta.empty()) throw Error(ErrorKind::IoError, path.string() + ": kernel sidecar missing");
  SensingKernel k;
  k.samples = read_waveform(path, "k");
  k.samples.unit = "1";
  try {
    k.tau = meta.at("tau_s");
    k.alpha = meta.at("alpha_rad");
    k.rabi = units::hz_to_angular(meta.at("rabi_hz").get<double>());
    k.t_min = meta.at("t_min_s");
    k.bandwidth = meta.at("bandwidth_hz");
    k.gain = meta.at("gain");
    k.baseline = meta.at("baseline");
    k.gamma = units::hz_to_angular(meta.at("gamma_hz_per_t").get<double>());
    k.origin = meta.value("origin", std::string("file"));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IoError, path.string() + ": kernel sidecar: " + e.what());
  }
  return k;
}

inline void write_trace(const std::filesystem::path& path, const MeasurementTrace& tr, json meta = json::object()) {
  Table t{{"time_s", "p", "field_T"}, {tr.times, tr.p_values, tr.field_values}};
  if (tr.noisy) {
    t.columns.insert(t.columns.end(), {"signal_counts", "bright_counts", "dark_counts"});
    t.data.insert(t.data.end(), {tr.signal_counts, tr.bright_counts, tr.dark_counts});
  }
  meta["baseline"] = tr.baseline;
  meta["calibration_per_t"] = tr.calibration;
  meta["readout"] = tr.readout;
  meta["plan"] = tr.plan;
  meta["responder"] = tr.responder;
  meta["noisy"] = tr.noisy;
  write_table(path, t, std::move(meta));
}

inline MeasurementTrace read_trace(const std::filesystem::path& path) {
  const Table t = read_table(path);
  const json meta = read_sidecar(path);
  MeasurementTrace tr;
  tr.times = t.column("time_s");
  tr.p_values = t.column("p");
  tr.field_values = t.has("field_T") ? t.column("field_T") : std::vector<double>(tr.times.size(), 0.0);
  if (t.has("signal_counts")) {
    tr.signal_counts = t.column("signal_counts");
    tr.bright_counts = t.column("bright_counts");
    tr.dark_counts = t.column("dark_counts");
    tr.noisy = true;
  }
  tr.baseline = meta.value("baseline", 0.0);
  tr.calibration = meta.value("calibration_per_t", 0.0);
  tr.responder = meta.value("responder", std::string("file"));
  try {
    if (meta.contains("readout")) tr.readout = meta.at("readout").get<ReadoutParams>();
    if (meta.contains("plan")) tr.plan = meta.at("plan").get<SamplingPlan>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IoError, path.string() + ": trace sidecar: " + e.what());
  }
  if (tr.times.size() > 1) {
    tr.plan.step = uniform_step(tr.times, 1e-6, path.string());
    tr.plan.t_start = tr.times.front();
    tr.plan.t_end = tr.times.back();
  }
  return tr;
}

inline void write_tradeoff(const std::filesystem::path& path, const std::vector<SensitivityPoint>& pts,
                           json meta = json::object()) {
  Table t{{"alpha_rad", "tau_s", "t_min_s", "b_min_T"}, std::vector<std::vector<double>>(4)};
  for (const auto& p : pts) {
    t.data[0].push_back(p.alpha);
    t.data[1].push_back(p.tau);
    t.data[2].push_back(p.t_min);
    t.data[3].push_back(p.b_min);
  }
  write_table(path, t, std::move(meta));
}

}  // namespace io
}  // namespace qmag
