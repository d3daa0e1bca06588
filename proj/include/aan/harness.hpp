#pragma once

#include "aan/config.hpp"
#include "aan/filter.hpp"
#include "aan/fuzzy.hpp"
#include "aan/mpc.hpp"
#include "aan/plant.hpp"
#include "aan/subject.hpp"

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace aan {

enum class ReferenceKind { Sinusoid, Step };

/// theta_r(t) = amplitude * cos(2 pi f t + phase) + offset, or a step between two holds.
struct ReferenceTrajectory {
  ReferenceKind kind = ReferenceKind::Sinusoid;
  double amplitude = 0.5;
  double offset = 0.7;
  double frequency = 0.25;
  double phase = -std::numbers::pi;
  // Step profile.
  double step_time = 1.0;
  double step_from = 0.2;
  double step_to = 1.2;

  struct Sample {
    double theta_r;
    double theta_r_dot;
  };
  Sample operator()(double t) const;
  double period() const { return 1.0 / frequency; }
  void validate(double theta_min = 0.0, double theta_max = 1.4) const;
};

struct AdaptationConfig {
  bool enabled = false;
  double threshold = 0.8;  // R_th
  void validate() const;
};

struct AdaptedReference {
  double theta_r;
  double virtual_time;
  bool frozen;
};

/// Halts the reference while mu_S > R_th by freezing its time base, so resumption is continuous.
AdaptedReference adapt_reference(double prev_theta_r, double virtual_time, double mu_safety,
                                 const AdaptationConfig& config, const ReferenceTrajectory& reference, double dt);

enum class EmgMode {
  Raw,       // synthesise raw EMG at the filter rate and run the envelope chain
  Envelope,  // feed synthetic envelopes straight to the torque model
};

struct TrialConfig {
  double duration = 24.0;       // s of reference time
  double control_rate = 500.0;  // Hz
  ReferenceTrajectory reference;
  AdaptationConfig adaptation;
  MpcConfig<double> mpc;
  FuzzyConfig<double> fuzzy;
  FilterSpec emg_filter;
  EmgMode emg_mode = EmgMode::Raw;
  bool model_human_torque = true;     // feed tau_hat into the prediction model
  std::optional<double> fixed_mode;   // bypass the fuzzy engine with a constant m
  bool hard_stop = false;
  double hard_stop_min = -0.5236, hard_stop_max = 1.5708;
  double max_duration_factor = 3.0;   // adaptive trials stop after this multiple of `duration`

  double dt() const { return 1.0 / control_rate; }
  void validate() const;

  void write(KeyValueFile& kv) const;
  static TrialConfig read(const KeyValueFile& kv, TrialConfig base);
  static TrialConfig read(const KeyValueFile& kv);
};

void write_condition(KeyValueFile& kv, const InvolvementCondition& c);
InvolvementCondition read_condition(const KeyValueFile& kv, InvolvementCondition base);

/// One control period. Column order of the trial CSV.
struct TrialSample {
  double t, theta_r, theta, theta_dot, tau_e, tau_h, tau_h_hat, ch1, ch2, mu_assist, mu_safety, mode, stage_cost,
      augmented_cost;
};

inline constexpr const char* kTrialColumns =
    "t,theta_r,theta,theta_dot,tau_e,tau_h_true,tau_h_hat,ch1,ch2,mu_A,mu_S,m,stage_cost,augmented_cost";

struct TrialRecord {
  std::vector<TrialSample> samples;
  std::string subject;
  std::string condition;
  std::uint64_t seed = 0;
  std::string config_hash;
  bool completed = false;
  std::string error;

  // Not exported: adaptation bookkeeping and solver health.
  std::vector<double> virtual_time;
  std::vector<char> frozen;
  double completion_time = 0.0;
  std::size_t degraded_solves = 0;
  std::size_t non_monotone_solves = 0;
  double max_abs_theta_dot = 0.0;
};

/// Hash of every field that shapes a run (trial config, subject, condition).
std::string config_hash(const TrialConfig& config, const SubjectProfile& subject, const InvolvementCondition& c);

/// Closed loop: EMG synthesis -> envelope -> torque estimate -> fuzzy mode -> MPC -> plant.
TrialRecord run_trial(const SubjectProfile& subject, const InvolvementCondition& condition, const TrialConfig& config,
                      std::uint64_t seed);

struct PhaseMetrics {
  std::size_t samples = 0;
  double human_torque_ratio = 0.0;  // R_h
  double error_median = 0.0;        // theta - theta_r
  double error_q1 = 0.0;
  double error_q3 = 0.0;
  double median_abs_error = 0.0;
  double rms_error = 0.0;
  double rms_mu_assist = 0.0;
  double rms_mu_safety = 0.0;
  double rms_tau_h_hat = 0.0;
  double rms_tau_e = 0.0;
  double rms_augmented_cost = 0.0;
};

struct TrialMetrics {
  PhaseMetrics extension;  // first half of each cycle
  PhaseMetrics flexion;
  double rms_error = 0.0;
  double max_abs_tau_e = 0.0;
  double max_abs_theta_dot = 0.0;
};

/// Percentile with linear interpolation between order statistics, q in [0, 1].
double percentile(std::vector<double> values, double q);
double human_torque_ratio(double rms_tau_h_hat, double rms_tau_e);

TrialMetrics compute_metrics(const TrialRecord& record, double period = 4.0);

void write_trial_csv(const TrialRecord& record, const std::filesystem::path& path);
TrialRecord read_trial_csv(const std::filesystem::path& path);
KeyValueFile metrics_to_kv(const TrialMetrics& m);

struct ExportPaths {
  std::filesystem::path csv, metrics, manifest;
};
/// Writes <stem>.csv, <stem>.metrics.txt and <stem>.manifest.json under `directory`.
ExportPaths export_trial(const TrialRecord& record, const TrialMetrics& metrics, const TrialConfig& config,
                         const std::filesystem::path& directory, const std::string& stem);

struct BatchResult {
  std::string stem;
  ExportPaths paths;
  TrialMetrics metrics;
  bool completed = false;
  std::string error;
};

/// Every subject x condition x seed, exported as <subject>_<condition>_s<seed>.* under `directory`.
std::vector<BatchResult> run_batch(const std::vector<SubjectProfile>& subjects,
                                   const std::vector<Involvement>& conditions, const std::vector<std::uint64_t>& seeds,
                                   const TrialConfig& config, const std::filesystem::path& directory,
                                   double magnitude = 8.0);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace aan
