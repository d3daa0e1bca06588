#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aan {

/// Lumped single-joint dynamics parameters: J*theta_ddot + B*theta_dot + tau_g*sin(theta) - tau_h = tau_e.
template <typename Scalar = double>
struct PlantParams {
  Scalar inertia{1};         // kg m^2
  Scalar damping{0};         // N m s / rad
  Scalar gravity_torque{0};  // N m

  bool valid() const {
    using std::isfinite;
    return isfinite(inertia) && isfinite(damping) && isfinite(gravity_torque) && inertia > Scalar(0) &&
           damping >= Scalar(0) && gravity_torque >= Scalar(0);
  }

  friend PlantParams operator+(const PlantParams& a, const PlantParams& b) {
    return {a.inertia + b.inertia, a.damping + b.damping, a.gravity_torque + b.gravity_torque};
  }
  friend PlantParams operator-(const PlantParams& a, const PlantParams& b) {
    return {a.inertia - b.inertia, a.damping - b.damping, a.gravity_torque - b.gravity_torque};
  }

  Eigen::Matrix<Scalar, 3, 1> vector() const { return {inertia, damping, gravity_torque}; }
  static PlantParams from_vector(const Eigen::Matrix<Scalar, 3, 1>& v) { return {v(0), v(1), v(2)}; }
};

template <typename Scalar = double>
struct JointState {
  Scalar theta{0};      // rad
  Scalar theta_dot{0};  // rad/s

  Eigen::Matrix<Scalar, 2, 1> vector() const { return {theta, theta_dot}; }
  static JointState from_vector(const Eigen::Matrix<Scalar, 2, 1>& v) { return {v(0), v(1)}; }
  bool finite() const { return std::isfinite(theta) && std::isfinite(theta_dot); }
};

/// Mechanical energy 0.5*J*theta_dot^2 - tau_g*cos(theta); non-increasing for an unforced damped plant.
template <typename Scalar>
Scalar mechanical_energy(const JointState<Scalar>& s, const PlantParams<Scalar>& p) {
  using std::cos;
  return Scalar(0.5) * p.inertia * s.theta_dot * s.theta_dot - p.gravity_torque * cos(s.theta);
}

template <typename Scalar>
Scalar joint_acceleration(const JointState<Scalar>& s, const PlantParams<Scalar>& p, Scalar tau_e, Scalar tau_h) {
  using std::sin;
  return (tau_e + tau_h - p.damping * s.theta_dot - p.gravity_torque * sin(s.theta)) / p.inertia;
}

/// One classical RK4 step of the coupled human-exoskeleton joint. Torques are held over the step.
template <typename Scalar>
JointState<Scalar> step_dynamics(const JointState<Scalar>& state, const PlantParams<Scalar>& params, Scalar tau_e,
                                 Scalar tau_h, Scalar dt) {
  using std::isfinite;
  if (!state.finite() || !isfinite(tau_e) || !isfinite(tau_h) || !isfinite(dt)) {
    throw std::invalid_argument("step_dynamics: non-finite input (theta=" + std::to_string(double(state.theta)) +
                                ", theta_dot=" + std::to_string(double(state.theta_dot)) +
                                ", tau_e=" + std::to_string(double(tau_e)) + ", tau_h=" + std::to_string(double(tau_h)) +
                                ")");
  }
  if (!(dt > Scalar(0)) || dt > Scalar(0.01)) {
    throw std::invalid_argument("step_dynamics: dt must lie in (0, 0.01], got " + std::to_string(double(dt)));
  }
  if (!params.valid()) throw std::invalid_argument("step_dynamics: invalid plant parameters");

  auto deriv = [&](Scalar th, Scalar om) {
    return Eigen::Matrix<Scalar, 2, 1>(om, joint_acceleration(JointState<Scalar>{th, om}, params, tau_e, tau_h));
  };
  const Scalar h = dt;
  const auto k1 = deriv(state.theta, state.theta_dot);
  const auto k2 = deriv(state.theta + h / 2 * k1(0), state.theta_dot + h / 2 * k1(1));
  const auto k3 = deriv(state.theta + h / 2 * k2(0), state.theta_dot + h / 2 * k2(1));
  const auto k4 = deriv(state.theta + h * k3(0), state.theta_dot + h * k3(1));
  const Eigen::Matrix<Scalar, 2, 1> next = state.vector() + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  return JointState<Scalar>::from_vector(next);
}

// ---------------------------------------------------------------------------
// Identified parameter sets.

namespace presets {
inline constexpr PlantParams<double> kExo{0.0377, 0.0207, 1.7536};
inline constexpr PlantParams<double> kHumanS1{0.4315, 0.1676, 14.256};
inline constexpr PlantParams<double> kHumanS2{0.1927, 0.1534, 7.5008};
inline constexpr PlantParams<double> kHumanS3{0.3060, 0.1575, 10.595};
}  // namespace presets

// ---------------------------------------------------------------------------
// Scripted human behaviour.

enum class Involvement { Relaxed, ExtensionAssist, ExtensionResist, FlexionAssist, FlexionResist };

std::string_view to_string(Involvement c);
Involvement involvement_from_string(std::string_view s);  // accepts R, EA, ER, FA, FR

enum class WindowMode {
  PerCycle,  // window given in cycle time, repeated every period
  Absolute,  // window given in trial time, applied once
};

struct InvolvementCondition {
  Involvement kind = Involvement::Relaxed;
  double magnitude = 8.0;  // A_h, N m
  WindowMode mode = WindowMode::PerCycle;
  double window_start = 0.0;
  double window_end = 0.0;
  double period = 4.0;     // cycle length for PerCycle windows
  double ramp_time = 0.2;  // raised-cosine rise/fall time
  double polarity_velocity = 0.05;  // rad/s scale of the smooth sign applied to the reference velocity

  /// Default for a condition: active window inside its movement phase, 0.3 s clear of each reversal.
  static InvolvementCondition standard(Involvement kind, double magnitude = 8.0, double period = 4.0);

  void validate() const;
};

/// Scripted voluntary torque. Assist pushes along the reference velocity, resist against it;
/// zero outside the window and continuous in t.
double human_torque(const InvolvementCondition& condition, double t, double theta_r_dot);

}  // namespace aan
