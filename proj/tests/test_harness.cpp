#include "aan/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace aan;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("aan_harness_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

TrialConfig short_trial(double seconds = 8.0) {
  TrialConfig cfg;
  cfg.duration = seconds;
  return cfg;
}

InvolvementCondition condition(Involvement k) { return InvolvementCondition::standard(k, 8.0, 4.0); }

TrialRecord synthetic_record(double tau_h_hat, double tau_e) {
  TrialRecord r;
  for (int i = 0; i < 2000; ++i) {
    TrialSample s{};
    s.t = i * 0.002;
    s.tau_h_hat = tau_h_hat * (i % 2 ? 1 : -1);
    s.tau_e = tau_e;
    s.theta_r = 0.5;
    s.theta = 0.5 + 0.001 * (i % 5);
    r.samples.push_back(s);
  }
  r.completed = true;
  return r;
}

}  // namespace

TEST_CASE("reference trajectory") {
  ReferenceTrajectory ref;
  CHECK(ref(0.0).theta_r == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(std::abs(ref(0.0).theta_r_dot) < 1e-15);
  CHECK(ref(2.0).theta_r == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(ref(1.0).theta_r == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(ref(1.0).theta_r_dot == doctest::Approx(2.0 * std::numbers::pi * 0.25 * 0.5).epsilon(1e-12));
  CHECK(ref(1.0).theta_r_dot == doctest::Approx(0.785).epsilon(1e-3));
  // Analytic derivative agrees with a central difference.
  for (double t = 0.1; t < 8.0; t += 0.37) {
    const double fd = (ref(t + 1e-6).theta_r - ref(t - 1e-6).theta_r) / 2e-6;
    CHECK(ref(t).theta_r_dot == doctest::Approx(fd).epsilon(1e-6));
  }
  ref.offset = 1.3;
  CHECK_THROWS_AS(ref.validate(0.0, 1.4), std::invalid_argument);
}

TEST_CASE("trajectory adaptation") {
  ReferenceTrajectory ref;
  AdaptationConfig on{true, 0.8};
  const auto held = adapt_reference(0.45, 1.3, 0.9, on, ref, 0.002);
  CHECK(held.frozen);
  CHECK(held.theta_r == 0.45);
  CHECK(held.virtual_time == 1.3);

  double vt = 0.0;
  for (int k = 1; k <= 1000; ++k) {
    const auto a = adapt_reference(0.0, vt, 0.0, on, ref, 0.002);
    vt = a.virtual_time;
    REQUIRE_FALSE(a.frozen);
    REQUIRE(a.theta_r == doctest::Approx(ref(k * 0.002).theta_r).epsilon(1e-12));
  }
  CHECK_THROWS_AS((AdaptationConfig{true, 1.0}.validate()), std::invalid_argument);
}

TEST_CASE("percentiles interpolate linearly") {
  CHECK(percentile({3.0, 1.0, 2.0, 4.0}, 0.5) == doctest::Approx(2.5));
  CHECK(percentile({3.0, 1.0, 2.0, 4.0}, 0.25) == doctest::Approx(1.75));
  CHECK(percentile({5.0}, 0.75) == 5.0);
  CHECK_THROWS_AS(percentile({}, 0.5), std::invalid_argument);
}

TEST_CASE("human torque ratio") {
  CHECK(compute_metrics(synthetic_record(0.0, 3.0)).extension.human_torque_ratio == 0.0);
  const auto m = compute_metrics(synthetic_record(3.0, 3.0));
  CHECK(m.extension.human_torque_ratio == doctest::Approx(0.5));
  CHECK(m.flexion.human_torque_ratio == doctest::Approx(0.5));
  CHECK(m.extension.samples == 1000);

  auto short_record = synthetic_record(1.0, 1.0);
  short_record.samples.resize(500);  // only the first second: no flexion samples
  CHECK_THROWS_AS(compute_metrics(short_record), std::invalid_argument);
}

TEST_CASE("relaxed, assisted and resisted closed loops") {
  const auto s1 = subject_preset("S1");
  const auto cfg = short_trial();

  const auto r = run_trial(s1, condition(Involvement::Relaxed), cfg, 1);
  REQUIRE(r.completed);
  CHECK(r.samples.size() == 4000);
  const auto mr = compute_metrics(r);
  CHECK(std::abs(mr.extension.error_median) <= 0.05);
  CHECK(std::abs(mr.flexion.error_median) <= 0.05);
  CHECK(mr.extension.human_torque_ratio < 0.1);
  CHECK(mr.rms_error < 0.05);

  const auto ea = compute_metrics(run_trial(s1, condition(Involvement::ExtensionAssist), cfg, 1));
  CHECK(ea.extension.rms_mu_assist > 0.4);
  CHECK(ea.flexion.rms_mu_assist < 0.1);

  const auto fr = compute_metrics(run_trial(s1, condition(Involvement::FlexionResist), cfg, 1));
  CHECK(fr.flexion.rms_mu_safety > 0.4);
  CHECK(fr.flexion.median_abs_error > 0.08);
}

TEST_CASE("timestamps are monotone at the control rate") {
  const auto r = run_trial(subject_preset("S2"), condition(Involvement::FlexionAssist), short_trial(2.0), 3);
  REQUIRE(r.completed);
  for (std::size_t i = 0; i < r.samples.size(); ++i) REQUIRE(r.samples[i].t == doctest::Approx(i * 0.002));
}

TEST_CASE("tracking error does not grow with m against a resistive script") {
  const auto s1 = subject_preset("S1");
  double prev = INFINITY;
  for (double m : {0.0, 0.5, 1.0}) {
    auto cfg = short_trial();
    cfg.fixed_mode = m;
    const auto rec = run_trial(s1, condition(Involvement::ExtensionResist), cfg, 1);
    REQUIRE(rec.completed);
    const double err = compute_metrics(rec).rms_error;
    MESSAGE("m=" << m << " rms error " << err);
    CHECK(err <= prev);
    prev = err;
  }
}

// Peaks above 2 N m occur only while the angle or velocity limits brake the limb.
TEST_CASE("m held at zero leaves a resisting limb nearly unassisted") {
  auto cfg = short_trial();
  cfg.fixed_mode = 0.0;
  const auto rec = run_trial(subject_preset("S1"), condition(Involvement::FlexionResist), cfg, 1);
  REQUIRE(rec.completed);
  std::vector<double> mag;
  double ss = 0.0;
  for (const auto& s : rec.samples) {
    mag.push_back(std::abs(s.tau_e));
    ss += s.tau_e * s.tau_e;
  }
  CHECK(std::sqrt(ss / mag.size()) < 2.0);
  CHECK(percentile(mag, 0.9) < 2.0);
}

TEST_CASE("numeric failure yields a partial record with its cause") {
  auto c = condition(Involvement::ExtensionAssist);
  c.magnitude = 1e300;
  const auto rec = run_trial(subject_preset("S1"), c, short_trial(2.0), 1);
  CHECK_FALSE(rec.completed);
  CHECK_FALSE(rec.error.empty());
  CHECK(rec.samples.size() < 1000);
}

TEST_CASE("export, re-import and determinism") {
  const auto cfg = short_trial(4.0);
  const auto s3 = subject_preset("S3");
  const auto a = run_trial(s3, condition(Involvement::ExtensionResist), cfg, 5);
  const auto b = run_trial(s3, condition(Involvement::ExtensionResist), cfg, 5);
  const auto ma = compute_metrics(a);
  const auto dir = scratch("export");
  const auto pa = export_trial(a, ma, cfg, dir, "a");
  const auto pb = export_trial(b, compute_metrics(b), cfg, dir, "b");
  CHECK(slurp(pa.csv) == slurp(pb.csv));
  CHECK(slurp(pa.csv).substr(0, std::string(kTrialColumns).size()) == kTrialColumns);

  const auto back = read_trial_csv(pa.csv);
  REQUIRE(back.samples.size() == a.samples.size());
  CHECK(metrics_to_kv(compute_metrics(back)).dump() == metrics_to_kv(ma).dump());
  CHECK(slurp(pa.metrics) == metrics_to_kv(ma).dump());

  const auto manifest = slurp(pa.manifest);
  CHECK(manifest.find(a.config_hash) != std::string::npos);
  CHECK(manifest.find("\"seed\": 5") != std::string::npos);

  const auto other = run_trial(s3, condition(Involvement::ExtensionResist), cfg, 6);
  CHECK(slurp(export_trial(other, compute_metrics(other), cfg, dir, "c").csv) != slurp(pa.csv));
  std::filesystem::remove_all(dir);
  CHECK_THROWS(read_trial_csv(dir / "missing.csv"));
}

TEST_CASE("config hash tracks every field") {
  const auto s = subject_preset("S1");
  const auto c = condition(Involvement::Relaxed);
  const TrialConfig base;
  const auto h = config_hash(base, s, c);
  CHECK(h.size() == 16);
  CHECK(config_hash(base, s, c) == h);

  auto cfg = base;
  cfg.mpc.w_tau *= 1.0000001;
  CHECK(config_hash(cfg, s, c) != h);
  cfg = base;
  cfg.fuzzy.p_assist = 0.4;
  CHECK(config_hash(cfg, s, c) != h);
  cfg = base;
  cfg.adaptation.threshold = 0.7;
  CHECK(config_hash(cfg, s, c) != h);
  auto s2 = s;
  s2.hte.a1 += 1.0;
  CHECK(config_hash(base, s2, c) != h);
  auto c2 = c;
  c2.magnitude = 7.0;
  CHECK(config_hash(base, s, c2) != h);
}

TEST_CASE("configuration round trip through key-value text") {
  TrialConfig cfg;
  cfg.duration = 12.0;
  cfg.mpc.w_theta = 250.0;
  cfg.fuzzy.p_assist = 0.3;
  cfg.fixed_mode = 0.25;
  cfg.adaptation = {true, 0.6};
  cfg.emg_mode = EmgMode::Envelope;
  cfg.reference.kind = ReferenceKind::Step;
  KeyValueFile kv;
  cfg.write(kv);
  const auto back = TrialConfig::read(KeyValueFile::parse(kv.dump()));
  KeyValueFile kv2;
  back.write(kv2);
  CHECK(kv.dump() == kv2.dump());
  CHECK(back.fixed_mode.value() == 0.25);

  auto subject = subject_preset("S2");
  subject.noise_level = 0.02;
  KeyValueFile ks;
  subject.write(ks);
  KeyValueFile ks2;
  SubjectProfile::read(KeyValueFile::parse(ks.dump())).write(ks2);
  CHECK(ks.dump() == ks2.dump());

  auto cond = condition(Involvement::FlexionAssist);
  cond.mode = WindowMode::Absolute;
  cond.window_start = 3.0;
  cond.window_end = 6.0;
  KeyValueFile kc;
  write_condition(kc, cond);
  KeyValueFile kc2;
  write_condition(kc2, read_condition(KeyValueFile::parse(kc.dump()), InvolvementCondition{}));
  CHECK(kc.dump() == kc2.dump());

  auto bad = KeyValueFile::parse("mpc.w_tau = -1\n");
  CHECK_THROWS_AS(TrialConfig::read(bad), std::invalid_argument);
}
