#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "qmag/config.hpp"
#include "qmag/io.hpp"
#include "qmag/scenario.hpp"

using namespace qmag;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qmag_test_io_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool mentions(const std::vector<std::string>& diags, const std::string& needle) {
  for (const auto& d : diags)
    if (d.find(needle) != std::string::npos) return true;
  return false;
}

std::string joined(const std::vector<std::string>& diags) {
  std::string s;
  for (const auto& d : diags) s += d + "\n";
  return s;
}

}  // namespace

TEST(Csv, WaveformRoundTripIsBitExact) {
  const fs::path dir = scratch("roundtrip");
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1e-3, 1e-3);
  std::vector<double> v(257);
  for (double& x : v) x = u(rng);
  v[3] = 1e-300;
  v[4] = -0.0;
  const SampledWaveform w(1e-11, -1.28e-9, v, "T");
  io::write_waveform(dir / "w.csv", w, {{"note", "test"}});
  const SampledWaveform r = io::read_waveform(dir / "w.csv");
  ASSERT_EQ(r.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(r.values[i], w.values[i]);
  EXPECT_NEAR(r.dt, w.dt, 1e-24);
  EXPECT_EQ(r.t0, w.t0);
  const json meta = io::read_sidecar(dir / "w.csv");
  EXPECT_EQ(meta.at("unit"), "T");
  EXPECT_EQ(meta.at("note"), "test");
  EXPECT_EQ(meta.at("rows"), 257);
}

TEST(Csv, KernelRoundTripKeepsMetadata) {
  const fs::path dir = scratch("kernel");
  const SensingKernel k = analytic_kernel(PulsePairSpec{}, 10e-12);
  io::write_kernel(dir / "k.csv", k);
  const SensingKernel r = io::read_kernel(dir / "k.csv");
  EXPECT_EQ(r.samples.values, k.samples.values);
  EXPECT_DOUBLE_EQ(r.tau, k.tau);
  EXPECT_DOUBLE_EQ(r.alpha, k.alpha);
  EXPECT_DOUBLE_EQ(r.gain, k.gain);
  EXPECT_DOUBLE_EQ(r.baseline, k.baseline);
  EXPECT_NEAR(r.gamma / k.gamma, 1.0, 1e-15);
  EXPECT_NEAR(r.rabi / k.rabi, 1.0, 1e-15);
  fs::remove(io::sidecar_path(dir / "k.csv"));
  EXPECT_THROW(io::read_kernel(dir / "k.csv"), Error);
}

TEST(Csv, TraceRoundTrip) {
  const fs::path dir = scratch("trace");
  const SensingKernel k = analytic_kernel(PulsePairSpec{}, 10e-12);
  const SampledWaveform wall = domain_wall_transient(DomainWallScenario{}, TimeGrid{-10e-9, 10e-9, 10e-12});
  SamplingPlan plan;
  plan.rng_seed = 9;
  const MeasurementTrace tr = sample_trace(ideal_responder(k, wall), plan, ReadoutParams{}, k.field_response());
  io::write_trace(dir / "t.csv", tr);
  const MeasurementTrace r = io::read_trace(dir / "t.csv");
  EXPECT_EQ(r.times, tr.times);
  EXPECT_EQ(r.p_values, tr.p_values);
  EXPECT_EQ(r.field_values, tr.field_values);
  EXPECT_EQ(r.signal_counts, tr.signal_counts);
  EXPECT_EQ(r.baseline, tr.baseline);
  EXPECT_EQ(r.plan.rng_seed, 9u);
}

TEST(Csv, MalformedInput) {
  const fs::path dir = scratch("bad");
  write_text(dir / "a.csv", "time_s,field_T\n0,1\n1e-12,abc\n");
  try {
    io::read_table(dir / "a.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  write_text(dir / "b.csv", "time_s,field_T\n0,1\n1e-12\n");
  EXPECT_THROW(io::read_table(dir / "b.csv"), Error);
  EXPECT_THROW(io::read_table(dir / "missing.csv"), Error);
}

TEST(ScopeImport, CalibratesAndToleratesRoundedTimes) {
  const fs::path dir = scratch("scope");
  std::string text = "# exported by a scope\ntime_s,volts\n";
  for (int i = 0; i < 100; ++i) {
    char line[64];
    std::snprintf(line, sizeof line, "%.4e,%.6f\n", i * 33.3333e-12, 0.01 * i);
    text += line;
  }
  write_text(dir / "scope.csv", text);
  const SampledWaveform w = io::import_scope_trace(dir / "scope.csv", 0.05);
  EXPECT_EQ(w.size(), 100u);
  EXPECT_NEAR(w.dt, 33.3333e-12, 1e-15);
  EXPECT_NEAR(w.values[40], 0.4 * 0.05, 1e-15);
  EXPECT_EQ(w.unit, "T");
}

TEST(ScopeImport, RejectsIrregularGrid) {
  const fs::path dir = scratch("scope_bad");
  write_text(dir / "s.csv", "t,v\n0,0\n1e-11,0\n3e-11,0\n4e-11,0\n");
  try {
    io::import_scope_trace(dir / "s.csv", 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridMismatch);
  }
}

TEST(Config, PresetsValidate) {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(QMAG_PRESET_DIR)) {
    if (entry.path().extension() != ".yaml") continue;
    ++count;
    const auto diags = validate_config(entry.path());
    EXPECT_TRUE(diags.empty()) << entry.path() << "\n" << joined(diags);
  }
  EXPECT_GE(count, 7u);
}

TEST(Config, InconsistentAngleNamesAllThreeFields) {
  const fs::path dir = scratch("cfg_alpha");
  const auto diags = validate_config(write_text(dir / "c.yaml",
                                                "mode: transient\n"
                                                "pulse:\n"
                                                "  rabi_hz: 125e6\n"
                                                "  duration_s: 4e-9\n"
                                                "  alpha_deg: 45\n"));
  ASSERT_FALSE(diags.empty());
  EXPECT_TRUE(mentions(diags, "alpha_deg")) << joined(diags);
  EXPECT_TRUE(mentions(diags, "rabi_hz")) << joined(diags);
  EXPECT_TRUE(mentions(diags, "duration_s")) << joined(diags);
}

TEST(Config, NonPositiveStandoff) {
  const fs::path dir = scratch("cfg_standoff");
  const auto diags = validate_config(write_text(dir / "c.yaml",
                                                "mode: transient\n"
                                                "signal:\n"
                                                "  type: domain_wall\n"
                                                "  standoff_m: -1e-9\n"));
  EXPECT_TRUE(mentions(diags, "standoff must be positive")) << joined(diags);
}

TEST(Config, UnknownKeyReportsLine) {
  const fs::path dir = scratch("cfg_unknown");
  const fs::path p = write_text(dir / "c.yaml",
                                "mode: transient\n"
                                "plan:\n"
                                "  t_start_s: -5e-9\n"
                                "  stepp_s: 1e-12\n");
  const auto diags = validate_config(p);
  ASSERT_EQ(diags.size(), 1u) << joined(diags);
  EXPECT_NE(diags[0].find("unknown key"), std::string::npos) << diags[0];
  EXPECT_NE(diags[0].find("stepp_s"), std::string::npos) << diags[0];
  EXPECT_NE(diags[0].find(":4:"), std::string::npos) << diags[0];
}

TEST(Config, ParseThrowsConfigError) {
  const fs::path dir = scratch("cfg_throw");
  const fs::path p = write_text(dir / "c.yaml", "mode: sideways\n");
  try {
    parse_config(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
  }
  EXPECT_FALSE(validate_config(write_text(dir / "d.yaml", "mode: [unterminated\n")).empty());
  EXPECT_FALSE(validate_config(dir / "nope.yaml").empty());
}

TEST(Config, UnitSuffixedValues) {
  const fs::path dir = scratch("cfg_values");
  const ScenarioConfig c = parse_config(write_text(dir / "c.yaml",
                                                   "mode: transient\n"
                                                   "pulse: {rabi_hz: 62.5e6, alpha_deg: 45, carrier_hz: resonant}\n"
                                                   "readout: {reference_counts: 1e6}\n"
                                                   "recon: {lambda: 0.5}\n"));
  EXPECT_NEAR(c.pulse.rabi, two_pi * 62.5e6, 1e-3);
  EXPECT_NEAR(c.pulse.duration, 4e-9, 1e-20);
  EXPECT_NEAR(c.pulse.carrier, c.nv.omega_minus(), 1e-3);
  EXPECT_NEAR(c.readout.reference_counts(), 1e6, 1e-6);
  EXPECT_DOUBLE_EQ(c.recon.lambda, 0.5);
}

TEST(Scenario, RunIsDeterministic) {
  ScenarioConfig c = parse_config(fs::path(QMAG_PRESET_DIR) / "fig3b.yaml");
  const fs::path a = scratch("run_a");
  const fs::path b = scratch("run_b");
  c.outputs = a;
  const ScenarioReport ra = run_scenario(c);
  c.outputs = b;
  const ScenarioReport rb = run_scenario(c);
  ASSERT_EQ(ra.files.size(), rb.files.size());
  ASSERT_FALSE(ra.files.empty());
  std::size_t csv = 0;
  for (std::size_t i = 0; i < ra.files.size(); ++i) {
    EXPECT_EQ(ra.files[i].filename(), rb.files[i].filename());
    if (ra.files[i].extension() != ".csv") continue;
    ++csv;
    EXPECT_EQ(slurp(ra.files[i]), slurp(rb.files[i])) << ra.files[i];
  }
  EXPECT_GT(csv, 0u);
  EXPECT_TRUE(fs::exists(a / "metrics.json"));
}

TEST(Scenario, TradeoffWritesCurve) {
  ScenarioConfig c = parse_config(fs::path(QMAG_PRESET_DIR) / "fig5.yaml");
  c.outputs = scratch("tradeoff");
  run_scenario(c);
  const io::Table t = io::read_table(c.outputs / "tradeoff.csv");
  EXPECT_EQ(t.columns, (std::vector<std::string>{"alpha_rad", "tau_s", "t_min_s", "b_min_T"}));
  ASSERT_GT(t.rows(), 2u);
  for (std::size_t i = 1; i < t.rows(); ++i) EXPECT_GT(t.column("t_min_s")[i], t.column("t_min_s")[i - 1]);
}
