#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace aan {

enum class MembershipKind { Sigmoidal, Gaussian };

template <typename Scalar = double>
struct MembershipParams {
  MembershipKind kind = MembershipKind::Sigmoidal;
  Scalar steepness{1};  // a, sigmoidal only
  Scalar center{0};     // c
  Scalar width{1};      // sigma, gaussian only

  static MembershipParams sigmoid(Scalar a, Scalar c) { return {MembershipKind::Sigmoidal, a, c, Scalar(1)}; }
  static MembershipParams gaussian(Scalar sigma, Scalar c) { return {MembershipKind::Gaussian, Scalar(0), c, sigma}; }

  bool valid() const {
    return kind == MembershipKind::Gaussian ? width > Scalar(0) : steepness != Scalar(0);
  }
};

/// Gaussian exp(-(x-c)^2 / (2 sigma^2)) or sigmoid 1 / (1 + exp(-a (x - c))).
template <typename Scalar>
Scalar membership(Scalar x, const MembershipParams<Scalar>& p) {
  using std::exp;
  if (p.kind == MembershipKind::Gaussian) {
    const Scalar d = x - p.center;
    return exp(-d * d / (Scalar(2) * p.width * p.width));
  }
  return Scalar(1) / (Scalar(1) + exp(-p.steepness * (x - p.center)));
}

/// Membership functions for the two inputs plus the mode penalties. Defaults are the
/// identified table values with p_A = 0.5, p_S = 1.0.
template <typename Scalar = double>
struct FuzzyConfig {
  MembershipParams<Scalar> torque_negative = MembershipParams<Scalar>::sigmoid(Scalar(-4), Scalar(-1));
  MembershipParams<Scalar> torque_positive = MembershipParams<Scalar>::sigmoid(Scalar(4), Scalar(1));
  MembershipParams<Scalar> velocity_negative = MembershipParams<Scalar>::sigmoid(Scalar(-20), Scalar(-0.1));
  MembershipParams<Scalar> velocity_zero = MembershipParams<Scalar>::gaussian(Scalar(0.1), Scalar(0));
  MembershipParams<Scalar> velocity_positive = MembershipParams<Scalar>::sigmoid(Scalar(20), Scalar(0.1));
  Scalar p_assist{0.5};
  Scalar p_safety{1.0};
  /// Optional hard relaxed band: |tau_hat| below this forces mu_A = mu_S = 0. Zero disables it.
  Scalar torque_dead_zone{0};

  void validate() const {
    for (const auto* m : {&torque_negative, &torque_positive, &velocity_negative, &velocity_zero, &velocity_positive}) {
      if (!m->valid()) throw std::invalid_argument("FuzzyConfig: invalid membership parameters");
    }
    if (!(p_assist >= Scalar(0) && p_assist <= Scalar(1) && p_safety >= Scalar(0) && p_safety <= Scalar(1))) {
      throw std::invalid_argument("FuzzyConfig: penalties p_A, p_S must lie in [0, 1]");
    }
    if (torque_dead_zone < Scalar(0)) throw std::invalid_argument("FuzzyConfig: dead zone must be >= 0");
  }
};

template <typename Scalar = double>
struct ModeLikelihoods {
  Scalar mu_assist{0};
  Scalar mu_safety{0};
  Scalar mode{1};  // m
};

/// Larsen product inference. Rules: same-sign torque and velocity -> assist; torque against a
/// non-opposing velocity -> safety. Returns m = 1 - (p_A mu_A + p_S mu_S), everything clamped to [0, 1].
template <typename Scalar>
ModeLikelihoods<Scalar> infer(Scalar tau_hat, Scalar theta_r_dot, const FuzzyConfig<Scalar>& c) {
  using std::abs;
  ModeLikelihoods<Scalar> out;
  if (c.torque_dead_zone > Scalar(0) && abs(tau_hat) < c.torque_dead_zone) return out;
  const Scalar tn = membership(tau_hat, c.torque_negative);
  const Scalar tp = membership(tau_hat, c.torque_positive);
  const Scalar vn = membership(theta_r_dot, c.velocity_negative);
  const Scalar vz = membership(theta_r_dot, c.velocity_zero);
  const Scalar vp = membership(theta_r_dot, c.velocity_positive);
  const Scalar mu_a = tn * vn + tp * vp;
  const Scalar mu_s = tn * (vz + vp) + tp * (vz + vn);
  const auto unit = [](Scalar v) { return std::clamp(v, Scalar(0), Scalar(1)); };
  out.mu_assist = unit(mu_a);
  out.mu_safety = unit(mu_s);
  out.mode = unit(Scalar(1) - (c.p_assist * mu_a + c.p_safety * mu_s));
  return out;
}

struct BudgetReport {
  bool pass = true;
  double torque_worst_sum = 0.0;    // max of f^N + f^P over the torque grid
  double torque_worst_at = 0.0;
  double velocity_worst_sum = 0.0;  // max of f^N + f^Z + f^P over the velocity grid
  double velocity_worst_at = 0.0;
  double tolerance = 0.02;
};

struct BudgetGrid {
  double torque_min = -25.0, torque_max = 25.0;
  double velocity_min = -2.0, velocity_max = 2.0;
  double resolution = 1e-3;
  double velocity_tolerance = 0.02;
};

/// Scans both input axes and checks that the memberships of each axis sum to at most one
/// (plus the tolerance on the velocity axis). Reports the worst point of each axis.
inline BudgetReport check_membership_budget(const FuzzyConfig<double>& c, const BudgetGrid& grid = {}) {
  BudgetReport r;
  r.tolerance = grid.velocity_tolerance;
  r.torque_worst_sum = -1.0;
  r.velocity_worst_sum = -1.0;
  const auto steps = [&](double lo, double hi) { return static_cast<long>(std::floor((hi - lo) / grid.resolution)); };
  for (long i = 0, n = steps(grid.torque_min, grid.torque_max); i <= n; ++i) {
    const double x = grid.torque_min + static_cast<double>(i) * grid.resolution;
    const double s = membership(x, c.torque_negative) + membership(x, c.torque_positive);
    if (s > r.torque_worst_sum) r.torque_worst_sum = s, r.torque_worst_at = x;
  }
  for (long i = 0, n = steps(grid.velocity_min, grid.velocity_max); i <= n; ++i) {
    const double x = grid.velocity_min + static_cast<double>(i) * grid.resolution;
    const double s = membership(x, c.velocity_negative) + membership(x, c.velocity_zero) +
                     membership(x, c.velocity_positive);
    if (s > r.velocity_worst_sum) r.velocity_worst_sum = s, r.velocity_worst_at = x;
  }
  r.pass = r.torque_worst_sum <= 1.0 && r.velocity_worst_sum <= 1.0 + grid.velocity_tolerance;
  return r;
}

}  // namespace aan
