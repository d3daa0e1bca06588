#include "aan/plant.hpp"

#include <cctype>
#include <cmath>
#include <string>
#include <numbers>

namespace aan {

std::string_view to_string(Involvement c) {
  switch (c) {
    case Involvement::Relaxed: return "R";
    case Involvement::ExtensionAssist: return "EA";
    case Involvement::ExtensionResist: return "ER";
    case Involvement::FlexionAssist: return "FA";
    case Involvement::FlexionResist: return "FR";
  }
  return "?";
}

Involvement involvement_from_string(std::string_view name) {
  std::string s(name);
  for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (s == "R") return Involvement::Relaxed;
  if (s == "EA") return Involvement::ExtensionAssist;
  if (s == "ER") return Involvement::ExtensionResist;
  if (s == "FA") return Involvement::FlexionAssist;
  if (s == "FR") return Involvement::FlexionResist;
  throw std::invalid_argument("unknown involvement condition '" + std::string(name) + "' (expected R, EA, ER, FA, FR)");
}

InvolvementCondition InvolvementCondition::standard(Involvement kind, double magnitude, double period) {
  InvolvementCondition c;
  c.kind = kind;
  c.magnitude = magnitude;
  c.period = period;
  const double half = period / 2.0;
  const double margin = 0.075 * period;
  const bool flexion = kind == Involvement::FlexionAssist || kind == Involvement::FlexionResist;
  c.window_start = (flexion ? half : 0.0) + margin;
  c.window_end = (flexion ? period : half) - margin;
  return c;
}

void InvolvementCondition::validate() const {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) {
    throw std::invalid_argument("InvolvementCondition: magnitude must be finite and >= 0");
  }
  if (!(window_start <= window_end)) throw std::invalid_argument("InvolvementCondition: window start after end");
  if (mode == WindowMode::PerCycle && (window_start < 0.0 || window_end > period)) {
    throw std::invalid_argument("InvolvementCondition: per-cycle window must lie within one period");
  }
  if (!(ramp_time >= 0.0) || !(polarity_velocity > 0.0)) {
    throw std::invalid_argument("InvolvementCondition: ramp time and polarity scale must be positive");
  }
}

namespace {

// 0 outside [start, end], 1 on the plateau, raised-cosine ramps of length `ramp` inside the window.
double window_envelope(double t, double start, double end, double ramp) {
  if (t <= start || t >= end) return 0.0;
  const double r = std::min(ramp, (end - start) / 2.0);
  if (r <= 0.0) return 1.0;
  const double from_edge = std::min(t - start, end - t);
  if (from_edge >= r) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * from_edge / r));
}

}  // namespace

double human_torque(const InvolvementCondition& c, double t, double theta_r_dot) {
  if (c.kind == Involvement::Relaxed || c.magnitude == 0.0) return 0.0;
  const double local = c.mode == WindowMode::PerCycle ? std::fmod(std::max(t, 0.0), c.period) : t;
  const double envelope = window_envelope(local, c.window_start, c.window_end, c.ramp_time);
  if (envelope == 0.0) return 0.0;
  const bool assist = c.kind == Involvement::ExtensionAssist || c.kind == Involvement::FlexionAssist;
  const double polarity = std::tanh(theta_r_dot / c.polarity_velocity);
  return (assist ? 1.0 : -1.0) * c.magnitude * envelope * polarity;
}

}  // namespace aan
