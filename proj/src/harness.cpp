#include "aan/harness.hpp"

#include "aan/hte.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace aan {

// ---------------------------------------------------------------------------
// Reference and adaptation.

ReferenceTrajectory::Sample ReferenceTrajectory::operator()(double t) const {
  if (kind == ReferenceKind::Step) return {t < step_time ? step_from : step_to, 0.0};
  const double w = 2.0 * std::numbers::pi * frequency;
  return {amplitude * std::cos(w * t + phase) + offset, -amplitude * w * std::sin(w * t + phase)};
}

void ReferenceTrajectory::validate(double theta_min, double theta_max) const {
  if (kind == ReferenceKind::Step) {
    for (double v : {step_from, step_to}) {
      if (v < theta_min || v > theta_max) throw std::invalid_argument("reference step outside the angle bounds");
    }
    return;
  }
  if (!(frequency > 0.0) || !(amplitude >= 0.0)) throw std::invalid_argument("reference: need f > 0, amplitude >= 0");
  if (offset - amplitude < theta_min || offset + amplitude > theta_max) {
    throw std::invalid_argument("reference range offset +/- amplitude exceeds the controller angle bounds");
  }
}

void AdaptationConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("adaptation threshold R_th must be in (0,1)");
}

AdaptedReference adapt_reference(double prev_theta_r, double virtual_time, double mu_safety,
                                 const AdaptationConfig& config, const ReferenceTrajectory& reference, double dt) {
  if (config.enabled && mu_safety > config.threshold) return {prev_theta_r, virtual_time, true};
  const double next = virtual_time + dt;
  return {reference(next).theta_r, next, false};
}

// ---------------------------------------------------------------------------
// Configuration.

void TrialConfig::validate() const {
  if (!(duration > 0.0) || !(control_rate > 0.0)) throw std::invalid_argument("trial: duration and rate must be > 0");
  mpc.validate();
  if (std::abs(mpc.control_period - dt()) > 1e-12) {
    throw std::invalid_argument("trial: mpc.control_period must equal 1 / control_rate");
  }
  fuzzy.validate();
  emg_filter.validate();
  reference.validate(mpc.theta_min, mpc.theta_max);
  if (adaptation.enabled) adaptation.validate();
  if (fixed_mode && !(*fixed_mode >= 0.0 && *fixed_mode <= 1.0)) throw std::invalid_argument("trial: fixed m in [0,1]");
}

namespace {

void write_membership(KeyValueFile& kv, const std::string& key, const MembershipParams<double>& m) {
  if (m.kind == MembershipKind::Gaussian) {
    kv.set(key + ".sigma", m.width);
  } else {
    kv.set(key + ".a", m.steepness);
  }
  kv.set(key + ".c", m.center);
}

void read_membership(const KeyValueFile& kv, const std::string& key, MembershipParams<double>& m) {
  if (m.kind == MembershipKind::Gaussian) {
    m.width = kv.get_double(key + ".sigma", m.width);
  } else {
    m.steepness = kv.get_double(key + ".a", m.steepness);
  }
  m.center = kv.get_double(key + ".c", m.center);
}

}  // namespace

void TrialConfig::write(KeyValueFile& kv) const {
  kv.set("trial.duration", duration);
  kv.set("trial.control_rate", control_rate);
  kv.set("trial.emg_mode", std::string(emg_mode == EmgMode::Raw ? "raw" : "envelope"));
  kv.set("trial.model_human_torque", model_human_torque);
  kv.set("trial.fixed_mode", fixed_mode ? format_double(*fixed_mode) : std::string("none"));
  kv.set("trial.hard_stop", hard_stop);
  kv.set("trial.hard_stop_min", hard_stop_min);
  kv.set("trial.hard_stop_max", hard_stop_max);
  kv.set("trial.max_duration_factor", max_duration_factor);

  kv.set("reference.kind", std::string(reference.kind == ReferenceKind::Step ? "step" : "sinusoid"));
  kv.set("reference.amplitude", reference.amplitude);
  kv.set("reference.offset", reference.offset);
  kv.set("reference.frequency", reference.frequency);
  kv.set("reference.phase", reference.phase);
  kv.set("reference.step_time", reference.step_time);
  kv.set("reference.step_from", reference.step_from);
  kv.set("reference.step_to", reference.step_to);

  kv.set("adaptation.enabled", adaptation.enabled);
  kv.set("adaptation.rth", adaptation.threshold);

  kv.set("mpc.horizon", mpc.horizon);
  kv.set("mpc.steps", mpc.steps);
  kv.set("mpc.w_theta", mpc.w_theta);
  kv.set("mpc.w_tau", mpc.w_tau);
  kv.set("mpc.theta_min", mpc.theta_min);
  kv.set("mpc.theta_max", mpc.theta_max);
  kv.set("mpc.theta_dot_min", mpc.theta_dot_min);
  kv.set("mpc.theta_dot_max", mpc.theta_dot_max);
  kv.set("mpc.tau_min", mpc.tau_min);
  kv.set("mpc.tau_max", mpc.tau_max);
  kv.set("mpc.gradient_iterations", mpc.gradient_iterations);
  kv.set("mpc.multiplier_updates", mpc.multiplier_updates);
  kv.set("mpc.penalty_init", mpc.penalty_init);
  kv.set("mpc.penalty_max", mpc.penalty_max);
  kv.set("mpc.penalty_growth", mpc.penalty_growth);
  kv.set("mpc.violation_tolerance", mpc.violation_tolerance);
  kv.set("mpc.max_outer_iterations", mpc.max_outer_iterations);
  kv.set("mpc.armijo", mpc.armijo);
  kv.set("mpc.max_backtracks", mpc.max_backtracks);
  kv.set("mpc.step_init", mpc.step_init);
  kv.set("mpc.step_min", mpc.step_min);
  kv.set("mpc.step_max", mpc.step_max);
  kv.set("mpc.gradient_tolerance", mpc.gradient_tolerance);
  kv.set("mpc.gauss_newton", mpc.gauss_newton);

  write_membership(kv, "fuzzy.torque_negative", fuzzy.torque_negative);
  write_membership(kv, "fuzzy.torque_positive", fuzzy.torque_positive);
  write_membership(kv, "fuzzy.velocity_negative", fuzzy.velocity_negative);
  write_membership(kv, "fuzzy.velocity_zero", fuzzy.velocity_zero);
  write_membership(kv, "fuzzy.velocity_positive", fuzzy.velocity_positive);
  kv.set("fuzzy.p_A", fuzzy.p_assist);
  kv.set("fuzzy.p_S", fuzzy.p_safety);
  kv.set("fuzzy.dead_zone", fuzzy.torque_dead_zone);

  kv.set("emg.band_low", emg_filter.band_low_hz);
  kv.set("emg.band_high", emg_filter.band_high_hz);
  kv.set("emg.band_order", emg_filter.band_order);
  kv.set("emg.envelope_cutoff", emg_filter.envelope_cutoff_hz);
  kv.set("emg.envelope_order", emg_filter.envelope_order);
  kv.set("emg.sample_rate", emg_filter.sample_rate);
  kv.set("emg.notch", emg_filter.mains_notch);
  kv.set("emg.notch_hz", emg_filter.mains_hz);
}

TrialConfig TrialConfig::read(const KeyValueFile& kv, TrialConfig c) {
  c.duration = kv.get_double("trial.duration", c.duration);
  c.control_rate = kv.get_double("trial.control_rate", c.control_rate);
  const auto mode = kv.get_string("trial.emg_mode", c.emg_mode == EmgMode::Raw ? "raw" : "envelope");
  if (mode != "raw" && mode != "envelope") throw std::invalid_argument("trial.emg_mode must be raw or envelope");
  c.emg_mode = mode == "raw" ? EmgMode::Raw : EmgMode::Envelope;
  c.model_human_torque = kv.get_bool("trial.model_human_torque", c.model_human_torque);
  if (const auto fm = kv.get("trial.fixed_mode")) {
    c.fixed_mode = *fm == "none" ? std::nullopt : std::optional<double>(parse_double(*fm, "trial.fixed_mode"));
  }
  c.hard_stop = kv.get_bool("trial.hard_stop", c.hard_stop);
  c.hard_stop_min = kv.get_double("trial.hard_stop_min", c.hard_stop_min);
  c.hard_stop_max = kv.get_double("trial.hard_stop_max", c.hard_stop_max);
  c.max_duration_factor = kv.get_double("trial.max_duration_factor", c.max_duration_factor);

  const auto kind = kv.get_string("reference.kind", c.reference.kind == ReferenceKind::Step ? "step" : "sinusoid");
  if (kind != "step" && kind != "sinusoid") throw std::invalid_argument("reference.kind must be sinusoid or step");
  c.reference.kind = kind == "step" ? ReferenceKind::Step : ReferenceKind::Sinusoid;
  c.reference.amplitude = kv.get_double("reference.amplitude", c.reference.amplitude);
  c.reference.offset = kv.get_double("reference.offset", c.reference.offset);
  c.reference.frequency = kv.get_double("reference.frequency", c.reference.frequency);
  c.reference.phase = kv.get_double("reference.phase", c.reference.phase);
  c.reference.step_time = kv.get_double("reference.step_time", c.reference.step_time);
  c.reference.step_from = kv.get_double("reference.step_from", c.reference.step_from);
  c.reference.step_to = kv.get_double("reference.step_to", c.reference.step_to);

  c.adaptation.enabled = kv.get_bool("adaptation.enabled", c.adaptation.enabled);
  c.adaptation.threshold = kv.get_double("adaptation.rth", c.adaptation.threshold);

  auto& m = c.mpc;
  m.horizon = kv.get_double("mpc.horizon", m.horizon);
  m.steps = kv.get_int("mpc.steps", m.steps);
  m.w_theta = kv.get_double("mpc.w_theta", m.w_theta);
  m.w_tau = kv.get_double("mpc.w_tau", m.w_tau);
  m.theta_min = kv.get_double("mpc.theta_min", m.theta_min);
  m.theta_max = kv.get_double("mpc.theta_max", m.theta_max);
  m.theta_dot_min = kv.get_double("mpc.theta_dot_min", m.theta_dot_min);
  m.theta_dot_max = kv.get_double("mpc.theta_dot_max", m.theta_dot_max);
  m.tau_min = kv.get_double("mpc.tau_min", m.tau_min);
  m.tau_max = kv.get_double("mpc.tau_max", m.tau_max);
  m.gradient_iterations = kv.get_int("mpc.gradient_iterations", m.gradient_iterations);
  m.multiplier_updates = kv.get_int("mpc.multiplier_updates", m.multiplier_updates);
  m.penalty_init = kv.get_double("mpc.penalty_init", m.penalty_init);
  m.penalty_max = kv.get_double("mpc.penalty_max", m.penalty_max);
  m.penalty_growth = kv.get_double("mpc.penalty_growth", m.penalty_growth);
  m.violation_tolerance = kv.get_double("mpc.violation_tolerance", m.violation_tolerance);
  m.max_outer_iterations = kv.get_int("mpc.max_outer_iterations", m.max_outer_iterations);
  m.armijo = kv.get_double("mpc.armijo", m.armijo);
  m.max_backtracks = kv.get_int("mpc.max_backtracks", m.max_backtracks);
  m.step_init = kv.get_double("mpc.step_init", m.step_init);
  m.step_min = kv.get_double("mpc.step_min", m.step_min);
  m.step_max = kv.get_double("mpc.step_max", m.step_max);
  m.gradient_tolerance = kv.get_double("mpc.gradient_tolerance", m.gradient_tolerance);
  m.gauss_newton = kv.get_bool("mpc.gauss_newton", m.gauss_newton);
  m.control_period = 1.0 / c.control_rate;

  read_membership(kv, "fuzzy.torque_negative", c.fuzzy.torque_negative);
  read_membership(kv, "fuzzy.torque_positive", c.fuzzy.torque_positive);
  read_membership(kv, "fuzzy.velocity_negative", c.fuzzy.velocity_negative);
  read_membership(kv, "fuzzy.velocity_zero", c.fuzzy.velocity_zero);
  read_membership(kv, "fuzzy.velocity_positive", c.fuzzy.velocity_positive);
  c.fuzzy.p_assist = kv.get_double("fuzzy.p_A", c.fuzzy.p_assist);
  c.fuzzy.p_safety = kv.get_double("fuzzy.p_S", c.fuzzy.p_safety);
  c.fuzzy.torque_dead_zone = kv.get_double("fuzzy.dead_zone", c.fuzzy.torque_dead_zone);

  auto& e = c.emg_filter;
  e.band_low_hz = kv.get_double("emg.band_low", e.band_low_hz);
  e.band_high_hz = kv.get_double("emg.band_high", e.band_high_hz);
  e.band_order = kv.get_int("emg.band_order", e.band_order);
  e.envelope_cutoff_hz = kv.get_double("emg.envelope_cutoff", e.envelope_cutoff_hz);
  e.envelope_order = kv.get_int("emg.envelope_order", e.envelope_order);
  e.sample_rate = kv.get_double("emg.sample_rate", e.sample_rate);
  e.mains_notch = kv.get_bool("emg.notch", e.mains_notch);
  e.mains_hz = kv.get_double("emg.notch_hz", e.mains_hz);
  c.validate();
  return c;
}

TrialConfig TrialConfig::read(const KeyValueFile& kv) { return read(kv, TrialConfig{}); }

void write_condition(KeyValueFile& kv, const InvolvementCondition& c) {
  kv.set("condition.kind", std::string(to_string(c.kind)));
  kv.set("condition.magnitude", c.magnitude);
  kv.set("condition.window_mode", std::string(c.mode == WindowMode::PerCycle ? "cycle" : "absolute"));
  kv.set("condition.window_start", c.window_start);
  kv.set("condition.window_end", c.window_end);
  kv.set("condition.period", c.period);
  kv.set("condition.ramp_time", c.ramp_time);
  kv.set("condition.polarity_velocity", c.polarity_velocity);
}

InvolvementCondition read_condition(const KeyValueFile& kv, InvolvementCondition c) {
  if (const auto k = kv.get("condition.kind")) {
    const auto kind = involvement_from_string(*k);
    if (kind != c.kind) c = InvolvementCondition::standard(kind, c.magnitude, c.period);
  }
  c.magnitude = kv.get_double("condition.magnitude", c.magnitude);
  const auto mode = kv.get_string("condition.window_mode", c.mode == WindowMode::PerCycle ? "cycle" : "absolute");
  if (mode != "cycle" && mode != "absolute") throw std::invalid_argument("condition.window_mode: cycle or absolute");
  c.mode = mode == "cycle" ? WindowMode::PerCycle : WindowMode::Absolute;
  c.window_start = kv.get_double("condition.window_start", c.window_start);
  c.window_end = kv.get_double("condition.window_end", c.window_end);
  c.period = kv.get_double("condition.period", c.period);
  c.ramp_time = kv.get_double("condition.ramp_time", c.ramp_time);
  c.polarity_velocity = kv.get_double("condition.polarity_velocity", c.polarity_velocity);
  c.validate();
  return c;
}

std::string config_hash(const TrialConfig& config, const SubjectProfile& subject, const InvolvementCondition& c) {
  KeyValueFile kv;
  config.write(kv);
  subject.write(kv);
  write_condition(kv, c);
  return hex64(fnv1a64(kv.dump()));
}

// ---------------------------------------------------------------------------
// Closed loop.

namespace {

// Reference clock that follows virtual time under adaptation.
struct ReferenceClock {
  double virtual_time = 0.0;
  double theta_r = 0.0;
  bool frozen = false;

  double velocity(const ReferenceTrajectory& ref) const { return frozen ? 0.0 : ref(virtual_time).theta_r_dot; }
};

// Voluntary torque at a time offset `lead` ahead of the present, extrapolating the reference clock.
double scripted_torque(const InvolvementCondition& c, const ReferenceTrajectory& ref, const ReferenceClock& clock,
                       double real_time, double lead) {
  const double v_time = clock.frozen ? clock.virtual_time : clock.virtual_time + lead;
  const double v_dot = clock.frozen ? 0.0 : ref(v_time).theta_r_dot;
  const double t = c.mode == WindowMode::PerCycle ? v_time : real_time + lead;
  return human_torque(c, t, v_dot);
}

}  // namespace

TrialRecord run_trial(const SubjectProfile& subject, const InvolvementCondition& condition, const TrialConfig& config,
                      std::uint64_t seed) {
  subject.validate();
  condition.validate();
  config.validate();

  TrialRecord rec;
  rec.subject = subject.name;
  rec.condition = std::string(to_string(condition.kind));
  rec.seed = seed;
  rec.config_hash = config_hash(config, subject, condition);

  const double dt = config.dt();
  const auto plant = subject.combined();
  const auto& ref = config.reference;
  const auto nominal_steps = static_cast<std::size_t>(std::llround(config.duration * config.control_rate));
  const auto max_steps = config.adaptation.enabled
                             ? static_cast<std::size_t>(std::llround(nominal_steps * config.max_duration_factor))
                             : nominal_steps;
  rec.samples.reserve(nominal_steps);

  std::mt19937_64 rng(seed);
  MpcController<double> controller(config.mpc);
  const double horizon_dt = config.mpc.dt();
  const int nodes = config.mpc.steps + 1;

  // EMG channels.
  const double emg_rate = config.emg_filter.sample_rate;
  EnvelopeExtractor chain1(config.emg_filter), chain2(config.emg_filter);
  RawEmgSynthesizer carrier(config.emg_filter);
  std::size_t emg_index = 0;
  EmgFrame frame;

  ReferenceClock clock;
  clock.theta_r = ref(0.0).theta_r;
  JointState<double> state{clock.theta_r, 0.0};
  double mu_safety_prev = 0.0;

  try {
    for (std::size_t k = 0; k < max_steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      if (k > 0) {
        const auto a = adapt_reference(clock.theta_r, clock.virtual_time, mu_safety_prev, config.adaptation, ref, dt);
        clock = {a.virtual_time, a.theta_r, a.frozen};
      }
      if (config.adaptation.enabled && clock.virtual_time >= config.duration - 0.5 * dt) break;
      const double theta_r_dot = clock.velocity(ref);

      // EMG up to the present.
      if (config.emg_mode == EmgMode::Raw) {
        while (static_cast<double>(emg_index) / emg_rate <= t + 1e-12) {
          const double s = static_cast<double>(emg_index) / emg_rate;
          const double future = scripted_torque(condition, ref, clock, s, subject.emg_lead);
          const EmgFrame env = synth_emg(future, subject.hte, subject.noise_level, rng, s);
          frame.ch1 = chain1.push(carrier.sample(env.ch1, rng));
          frame.ch2 = chain2.push(carrier.sample(env.ch2, rng));
          ++emg_index;
        }
        frame.timestamp = t;
      } else {
        const double future = scripted_torque(condition, ref, clock, t, subject.emg_lead);
        frame = synth_emg(future, subject.hte, subject.noise_level, rng, t);
      }
      const double tau_h_hat = estimate_torque(frame, subject.hte);

      const auto modes = infer(tau_h_hat, theta_r_dot, config.fuzzy);
      const double m = config.fixed_mode.value_or(modes.mode);

      MpcInputs<double> in;
      in.state = state;
      in.params = plant;
      in.mode = m;
      in.tau_h_hat = config.model_human_torque ? tau_h_hat : 0.0;
      in.reference.resize(nodes);
      for (int j = 0; j < nodes; ++j) {
        in.reference(j) = clock.frozen ? clock.theta_r : ref(clock.virtual_time + j * horizon_dt).theta_r;
      }
      const auto out = controller.step(in);
      if (out.diagnostics.status == SolveStatus::Degraded) ++rec.degraded_solves;
      if (!out.diagnostics.monotone) ++rec.non_monotone_solves;

      const double tau_h = scripted_torque(condition, ref, clock, t, 0.0);
      rec.samples.push_back({t, clock.theta_r, state.theta, state.theta_dot, out.tau_e, tau_h, tau_h_hat, frame.ch1,
                             frame.ch2, modes.mu_assist, modes.mu_safety, m, out.diagnostics.stage_cost,
                             out.diagnostics.augmented_cost});
      rec.virtual_time.push_back(clock.virtual_time);
      rec.frozen.push_back(clock.frozen ? 1 : 0);
      rec.max_abs_theta_dot = std::max(rec.max_abs_theta_dot, std::abs(state.theta_dot));

      state = step_dynamics(state, plant, out.tau_e, tau_h, dt);
      if (config.hard_stop) {
        if (state.theta < config.hard_stop_min) state = {config.hard_stop_min, std::max(0.0, state.theta_dot)};
        if (state.theta > config.hard_stop_max) state = {config.hard_stop_max, std::min(0.0, state.theta_dot)};
      }
      mu_safety_prev = modes.mu_safety;
      rec.completion_time = t + dt;
    }
    rec.completed = true;
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.completed = false;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Metrics.

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("percentile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double human_torque_ratio(double rms_h, double rms_e) {
  const double denom = rms_h + rms_e;
  return denom > 0.0 ? rms_h / denom : 0.0;
}

namespace {

PhaseMetrics phase_metrics(const std::vector<const TrialSample*>& rows) {
  if (rows.empty()) throw std::invalid_argument("compute_metrics: empty phase");
  PhaseMetrics p;
  p.samples = rows.size();
  std::vector<double> err, abs_err;
  double sh = 0, se = 0, sa = 0, ss = 0, sc = 0, serr = 0;
  for (const auto* r : rows) {
    const double e = r->theta - r->theta_r;
    err.push_back(e);
    abs_err.push_back(std::abs(e));
    sh += r->tau_h_hat * r->tau_h_hat;
    se += r->tau_e * r->tau_e;
    sa += r->mu_assist * r->mu_assist;
    ss += r->mu_safety * r->mu_safety;
    sc += r->augmented_cost * r->augmented_cost;
    serr += e * e;
  }
  const double n = static_cast<double>(rows.size());
  p.rms_tau_h_hat = std::sqrt(sh / n);
  p.rms_tau_e = std::sqrt(se / n);
  p.human_torque_ratio = human_torque_ratio(p.rms_tau_h_hat, p.rms_tau_e);
  p.rms_mu_assist = std::sqrt(sa / n);
  p.rms_mu_safety = std::sqrt(ss / n);
  p.rms_augmented_cost = std::sqrt(sc / n);
  p.rms_error = std::sqrt(serr / n);
  p.error_median = percentile(err, 0.5);
  p.error_q1 = percentile(err, 0.25);
  p.error_q3 = percentile(err, 0.75);
  p.median_abs_error = percentile(abs_err, 0.5);
  return p;
}

}  // namespace

TrialMetrics compute_metrics(const TrialRecord& record, double period) {
  if (!(period > 0.0)) throw std::invalid_argument("compute_metrics: period must be > 0");
  std::vector<const TrialSample*> ext, flex;
  TrialMetrics m;
  double serr = 0.0;
  for (const auto& r : record.samples) {
    const double local = std::fmod(r.t, period);
    (local < period / 2.0 ? ext : flex).push_back(&r);
    const double e = r.theta - r.theta_r;
    serr += e * e;
    m.max_abs_tau_e = std::max(m.max_abs_tau_e, std::abs(r.tau_e));
    m.max_abs_theta_dot = std::max(m.max_abs_theta_dot, std::abs(r.theta_dot));
  }
  m.extension = phase_metrics(ext);
  m.flexion = phase_metrics(flex);
  m.rms_error = std::sqrt(serr / static_cast<double>(record.samples.size()));
  return m;
}

// ---------------------------------------------------------------------------
// Export.

void write_trial_csv(const TrialRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trial CSV " + path.string());
  out << kTrialColumns << '\n';
  std::string line;
  for (const auto& r : record.samples) {
    line.clear();
    for (double v : {r.t, r.theta_r, r.theta, r.theta_dot, r.tau_e, r.tau_h, r.tau_h_hat, r.ch1, r.ch2, r.mu_assist,
                     r.mu_safety, r.mode, r.stage_cost, r.augmented_cost}) {
      if (!line.empty()) line += ',';
      line += format_double(v);
    }
    out << line << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

TrialRecord read_trial_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trial CSV " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTrialColumns) {
    throw std::runtime_error(path.string() + ": unexpected header, expected " + std::string(kTrialColumns));
  }
  TrialRecord rec;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    double v[14];
    std::size_t field = 0, pos = 0;
    while (field < 14) {
      const auto comma = line.find(',', pos);
      const auto token = std::string_view(line).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      v[field++] = parse_double(token, path.string() + ":" + std::to_string(line_no));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (field != 14) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 14 columns");
    rec.samples.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12], v[13]});
  }
  rec.completed = true;
  return rec;
}

KeyValueFile metrics_to_kv(const TrialMetrics& m) {
  KeyValueFile kv;
  const auto put = [&](const std::string& prefix, const PhaseMetrics& p) {
    kv.set(prefix + ".samples", static_cast<int>(p.samples));
    kv.set(prefix + ".R_h", p.human_torque_ratio);
    kv.set(prefix + ".error_median", p.error_median);
    kv.set(prefix + ".error_q1", p.error_q1);
    kv.set(prefix + ".error_q3", p.error_q3);
    kv.set(prefix + ".median_abs_error", p.median_abs_error);
    kv.set(prefix + ".rms_error", p.rms_error);
    kv.set(prefix + ".rms_mu_A", p.rms_mu_assist);
    kv.set(prefix + ".rms_mu_S", p.rms_mu_safety);
    kv.set(prefix + ".rms_tau_h_hat", p.rms_tau_h_hat);
    kv.set(prefix + ".rms_tau_e", p.rms_tau_e);
    kv.set(prefix + ".rms_augmented_cost", p.rms_augmented_cost);
  };
  put("extension", m.extension);
  put("flexion", m.flexion);
  kv.set("trial.rms_error", m.rms_error);
  kv.set("trial.max_abs_tau_e", m.max_abs_tau_e);
  kv.set("trial.max_abs_theta_dot", m.max_abs_theta_dot);
  return kv;
}

ExportPaths export_trial(const TrialRecord& record, const TrialMetrics& metrics, const TrialConfig& config,
                         const std::filesystem::path& directory, const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw std::runtime_error("cannot create " + directory.string() + ": " + ec.message());
  ExportPaths p{directory / (stem + ".csv"), directory / (stem + ".metrics.txt"), directory / (stem + ".manifest.json")};
  write_trial_csv(record, p.csv);
  metrics_to_kv(metrics).save(p.metrics);

  KeyValueFile kv;
  config.write(kv);
  nlohmann::ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["subject"] = record.subject;
  manifest["condition"] = record.condition;
  manifest["seed"] = record.seed;
  manifest["config_hash"] = record.config_hash;
  manifest["completed"] = record.completed;
  if (!record.error.empty()) manifest["error"] = record.error;
  manifest["samples"] = record.samples.size();
  manifest["columns"] = kTrialColumns;
  manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  manifest["config"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : kv.entries()) manifest["config"][k] = v;
  std::ofstream out(p.manifest, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.manifest.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + p.manifest.string());
  return p;
}

std::vector<BatchResult> run_batch(const std::vector<SubjectProfile>& subjects,
                                   const std::vector<Involvement>& conditions, const std::vector<std::uint64_t>& seeds,
                                   const TrialConfig& config, const std::filesystem::path& directory,
                                   double magnitude) {
  std::vector<BatchResult> out;
  for (const auto& subject : subjects) {
    for (const auto kind : conditions) {
      const auto condition = InvolvementCondition::standard(kind, magnitude, config.reference.period());
      for (const auto seed : seeds) {
        BatchResult r;
        r.stem = subject.name + "_" + std::string(to_string(kind)) + "_s" + std::to_string(seed);
        const auto record = run_trial(subject, condition, config, seed);
        r.completed = record.completed;
        r.error = record.error;
        if (record.completed) r.metrics = compute_metrics(record, config.reference.period());
        r.paths = export_trial(record, r.metrics, config, directory, r.stem);
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

}  // namespace aan
