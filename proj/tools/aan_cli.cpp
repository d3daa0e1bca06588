#include "aan/harness.hpp"
#include "aan/hte.hpp"
#include "aan/sysid.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace aan;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Settings shared by run and batch: an optional config file plus key=value overrides.
struct Settings {
  std::string config_path;
  std::vector<std::string> overrides;
  double duration = 0.0;
  double p_assist = -1.0, p_safety = -1.0;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "key-value config file");
    app->add_option("--set", overrides, "override a config key, key=value (repeatable)");
    app->add_option("--duration", duration, "trial duration in s");
    app->add_option("--p-assist", p_assist, "assist penalty p_A");
    app->add_option("--p-safety", p_safety, "safety penalty p_S");
  }

  KeyValueFile file() const {
    KeyValueFile kv;
    if (!config_path.empty()) kv = KeyValueFile::load(config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + o + "'");
      kv.merge(KeyValueFile::parse(o, "--set"));
    }
    return kv;
  }

  TrialConfig trial(const KeyValueFile& kv) const {
    auto cfg = TrialConfig::read(kv);
    if (duration > 0.0) cfg.duration = duration;
    if (p_assist >= 0.0) cfg.fuzzy.p_assist = p_assist;
    if (p_safety >= 0.0) cfg.fuzzy.p_safety = p_safety;
    cfg.validate();
    return cfg;
  }
};

void print_metrics(const TrialMetrics& m) { std::cout << metrics_to_kv(m).dump(); }

int cmd_identify(const std::string& subject_name, const SysIdConfig& cfg, const fs::path& out) {
  const auto subject = subject_preset(subject_name);
  fs::create_directories(out);
  const auto exo_data = run_excitation(subject.exo, cfg);
  const auto combined_data = run_excitation(subject.combined(), cfg);
  const auto exo = fit_params(exo_data);
  const auto combined = fit_params(combined_data);
  const auto human = infer_human_params(combined.params, exo.params);

  KeyValueFile kv;
  const auto put = [&](const std::string& p, const FitReport& r) {
    kv.set(p + ".J", r.params.inertia);
    kv.set(p + ".B", r.params.damping);
    kv.set(p + ".tau_g", r.params.gravity_torque);
    kv.set(p + ".std_J", r.std_error(0));
    kv.set(p + ".std_B", r.std_error(1));
    kv.set(p + ".std_tau_g", r.std_error(2));
    kv.set(p + ".rmse", r.rmse);
    kv.set(p + ".torque_rms", r.torque_rms);
    kv.set(p + ".rows", static_cast<int>(r.rows));
  };
  put("exo", exo);
  put("combined", combined);
  kv.set("human.J", human.params.inertia);
  kv.set("human.B", human.params.damping);
  kv.set("human.tau_g", human.params.gravity_torque);
  kv.set("human.non_physical", human.non_physical);
  kv.set("sysid.gain", cfg.gain);
  kv.set("sysid.torque_noise", cfg.torque_noise);
  kv.save(out / (subject_name + ".params.txt"));
  write_dataset_csv(combined_data, out / (subject_name + ".dataset.csv"));
  write_dataset_csv(exo_data, out / (subject_name + ".exo_dataset.csv"));

  std::cout << kv.dump();
  if (human.non_physical) std::cerr << "warning: " << human.warning << "\n";
  return 0;
}

// Columns t,ch1,ch2,tau_hr. With raw = true ch1/ch2 are raw EMG and go through the envelope chain.
HteCalibration calibrate_from_csv(const fs::path& path, bool raw, double k1, FilterSpec spec) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,ch1,ch2,tau_hr", 0) != 0) {
    throw std::runtime_error(path.string() + ": expected header t,ch1,ch2,tau_hr");
  }
  std::vector<double> t, c1, c2, tau;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() < 4) throw std::runtime_error(path.string() + ":" + std::to_string(row) + ": need 4 columns");
    const std::string ctx = path.string() + ":" + std::to_string(row);
    t.push_back(parse_double(f[0], ctx));
    c1.push_back(parse_double(f[1], ctx));
    c2.push_back(parse_double(f[2], ctx));
    tau.push_back(parse_double(f[3], ctx));
  }
  if (t.size() < 3) throw std::runtime_error(path.string() + ": too few rows");
  const double fs_hz = (t.size() - 1) / (t.back() - t.front());
  if (raw) {
    spec.sample_rate = fs_hz;
    c1 = process_emg(c1, spec);
    c2 = process_emg(c2, spec);
  }
  std::vector<EmgFrame> frames(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) frames[i] = {c1[i], c2[i], t[i]};
  return calibrate_hte(frames, tau, k1, fs_hz);
}

// Stiff tracking of each condition against a relaxed baseline; the torque difference is the human torque.
HteCalibration calibrate_simulated(const SubjectProfile& subject, double duration, std::uint64_t seed) {
  TrialConfig cfg;
  cfg.duration = duration;
  cfg.fixed_mode = 1.0;
  cfg.emg_mode = EmgMode::Envelope;
  const auto period = cfg.reference.period();
  const auto per_cycle = static_cast<std::size_t>(std::llround(period * cfg.control_rate));
  const auto relaxed = run_trial(subject, InvolvementCondition::standard(Involvement::Relaxed, 8.0, period), cfg, seed);
  if (!relaxed.completed) throw std::runtime_error("relaxed trial failed: " + relaxed.error);
  std::vector<double> tr;
  for (const auto& s : relaxed.samples) tr.push_back(s.tau_e);

  std::vector<EmgFrame> frames;
  std::vector<double> tau_hr;
  const std::size_t lead = static_cast<std::size_t>(std::llround(subject.emg_lead * cfg.control_rate));
  for (auto kind : {Involvement::ExtensionAssist, Involvement::ExtensionResist, Involvement::FlexionAssist,
                    Involvement::FlexionResist}) {
    const auto rec = run_trial(subject, InvolvementCondition::standard(kind, 8.0, period), cfg, seed);
    if (!rec.completed) throw std::runtime_error(std::string(to_string(kind)) + " trial failed: " + rec.error);
    std::vector<double> tc;
    for (const auto& s : rec.samples) tc.push_back(s.tau_e);
    const auto hr = reference_torque(tr, tc, per_cycle);
    // Pair within the trial, then append, so no pair straddles two trials.
    for (std::size_t i = 0; i + lead < rec.samples.size(); ++i) {
      frames.push_back({rec.samples[i].ch1, rec.samples[i].ch2, rec.samples[i].t});
      tau_hr.push_back(hr[i + lead]);
    }
  }
  return calibrate_hte(frames, tau_hr, 0.0, cfg.control_rate);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Assist-as-needed knee exoskeleton simulator"};
  app.require_subcommand(1);

  // identify
  auto* identify = app.add_subcommand("identify", "excite exo and coupled plant, fit (J, B, tau_g)");
  std::string id_subject = "S1", id_out = "identify";
  SysIdConfig id_cfg;
  identify->add_option("--subject", id_subject, "S1, S2 or S3");
  identify->add_option("--gain", id_cfg.gain, "proportional gain K");
  identify->add_option("--noise", id_cfg.torque_noise, "torque noise, fraction of RMS");
  identify->add_option("--seed", id_cfg.seed, "noise seed");
  identify->add_option("--out", id_out, "output directory");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "fit the EMG-to-torque model");
  std::string cal_subject = "S1", cal_csv, cal_out = "calibrate";
  bool cal_sim = false, cal_raw = false;
  double cal_duration = 24.0, cal_k1 = 0.2;
  std::uint64_t cal_seed = 1;
  calibrate->add_option("--subject", cal_subject, "subject preset");
  calibrate->add_flag("--simulate", cal_sim, "generate calibration data by torque superposition");
  calibrate->add_option("--csv", cal_csv, "recorded data: t,ch1,ch2,tau_hr");
  calibrate->add_flag("--raw", cal_raw, "csv channels are raw EMG");
  calibrate->add_option("--k1", cal_k1, "electromechanical lead in s (csv input)");
  calibrate->add_option("--duration", cal_duration, "simulated trial length, s");
  calibrate->add_option("--seed", cal_seed, "seed");
  calibrate->add_option("--out", cal_out, "output directory");

  // run
  auto* run = app.add_subcommand("run", "one closed-loop trial");
  std::string run_subject = "S1", run_condition = "R", run_out = "runs";
  bool run_adapt = false;
  double run_rth = 0.8;
  std::uint64_t run_seed = 1;
  Settings run_settings;
  run->add_option("--subject", run_subject, "S1, S2 or S3")->required();
  run->add_option("--condition", run_condition, "R, EA, ER, FA or FR")->required();
  auto* adapt_flag = run->add_flag("--adapt", run_adapt, "enable trajectory adaptation");
  auto* rth_opt = run->add_option("--rth", run_rth, "adaptation threshold R_th");
  run->add_option("--seed", run_seed, "random seed");
  run->add_option("--out", run_out, "output directory");
  run_settings.add_to(run);

  // batch
  auto* batch = app.add_subcommand("batch", "every subject x condition x seed");
  std::string b_subjects = "S1,S2,S3", b_conditions = "R,EA,ER,FA,FR", b_seeds = "1", b_out = "batch";
  double b_magnitude = 8.0;
  Settings b_settings;
  batch->add_option("--subjects", b_subjects, "comma separated");
  batch->add_option("--conditions", b_conditions, "comma separated");
  batch->add_option("--seeds", b_seeds, "comma separated");
  batch->add_option("--magnitude", b_magnitude, "scripted human torque amplitude, N m");
  batch->add_option("--out", b_out, "output directory");
  b_settings.add_to(batch);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "phase metrics of a trial CSV");
  std::string m_csv;
  double m_period = 4.0;
  metrics->add_option("csv", m_csv, "trial CSV")->required()->check(CLI::ExistingFile);
  metrics->add_option("--period", m_period, "cycle period, s");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*identify) return cmd_identify(id_subject, id_cfg, id_out);

    if (*calibrate) {
      const auto subject = subject_preset(cal_subject);
      HteCalibration cal;
      if (!cal_csv.empty()) {
        cal = calibrate_from_csv(cal_csv, cal_raw, cal_k1, FilterSpec{});
      } else if (cal_sim) {
        cal = calibrate_simulated(subject, cal_duration, cal_seed);
      } else {
        throw std::invalid_argument("calibrate needs --simulate or --csv");
      }
      KeyValueFile kv;
      kv.set("hte.b0", cal.model.b0);
      kv.set("hte.a1", cal.model.a1);
      kv.set("hte.a2", cal.model.a2);
      kv.set("fit.rmse", cal.rmse);
      kv.set("fit.nrmse", cal.nrmse);
      kv.set("fit.accuracy", 1.0 - cal.nrmse);
      kv.set("fit.samples", static_cast<int>(cal.samples));
      kv.set("fit.shift_samples", static_cast<int>(cal.shift_samples));
      fs::create_directories(cal_out);
      kv.save(fs::path(cal_out) / (cal_subject + ".hte.txt"));
      std::cout << kv.dump();
      return 0;
    }

    if (*run) {
      const auto kv = run_settings.file();
      auto cfg = run_settings.trial(kv);
      if (*adapt_flag) cfg.adaptation.enabled = run_adapt;
      if (*rth_opt) cfg.adaptation.threshold = run_rth;
      cfg.validate();
      const auto subject = SubjectProfile::read(kv, subject_preset(run_subject));
      const auto kind = involvement_from_string(run_condition);
      const auto condition =
          read_condition(kv, InvolvementCondition::standard(kind, 8.0, cfg.reference.period()));
      const auto rec = run_trial(subject, condition, cfg, run_seed);
      TrialMetrics m;
      if (rec.completed) m = compute_metrics(rec, cfg.reference.period());
      const std::string stem = subject.name + "_" + std::string(to_string(kind)) + "_s" + std::to_string(run_seed);
      const auto paths = export_trial(rec, m, cfg, run_out, stem);
      std::cout << "csv = " << paths.csv.string() << "\n";
      if (!rec.completed) {
        std::cerr << "trial aborted: " << rec.error << "\n";
        return 2;
      }
      if (cfg.adaptation.enabled) std::cout << "completion_time = " << format_double(rec.completion_time) << "\n";
      print_metrics(m);
      return 0;
    }

    if (*batch) {
      const auto kv = b_settings.file();
      const auto cfg = b_settings.trial(kv);
      std::vector<SubjectProfile> subjects;
      for (const auto& s : split(b_subjects, ',')) subjects.push_back(SubjectProfile::read(kv, subject_preset(s)));
      std::vector<Involvement> kinds;
      for (const auto& c : split(b_conditions, ',')) kinds.push_back(involvement_from_string(c));
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split(b_seeds, ',')) seeds.push_back(std::stoull(s));
      const auto results = run_batch(subjects, kinds, seeds, cfg, b_out, b_magnitude);
      int failed = 0;
      for (const auto& r : results) {
        std::cout << r.stem << (r.completed ? " ok" : " FAILED: " + r.error) << "\n";
        failed += r.completed ? 0 : 1;
      }
      return failed ? 2 : 0;
    }

    if (*metrics) {
      print_metrics(compute_metrics(read_trial_csv(m_csv), m_period));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
