#pragma once

#include "aan/plant.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aan {

/// Receding-horizon settings. Tracking cost is scaled by the assistance mode m.
template <typename Scalar = double>
struct MpcConfig {
  Scalar horizon{0.2};  // s
  int steps = 20;
  Scalar w_theta{1000};
  Scalar w_tau{0.01};

  Scalar theta_min{0}, theta_max{1.4};
  Scalar theta_dot_min{-2}, theta_dot_max{2};
  Scalar tau_min{-25}, tau_max{25};

  // Real-time iteration budget.
  int gradient_iterations = 30;
  int multiplier_updates = 1;
  Scalar control_period{0.002};

  // Augmented Lagrangian.
  Scalar penalty_init{1e3};
  Scalar penalty_max{1e6};
  Scalar penalty_growth{2};
  Scalar violation_tolerance{1e-3};
  int max_outer_iterations = 50;  // standalone solve only

  // Projected-gradient line search.
  Scalar armijo{1e-4};
  int max_backtracks = 40;
  Scalar step_init{1};
  Scalar step_min{1e-8};
  Scalar step_max{1e4};
  Scalar gradient_tolerance{1e-8};
  // Scale steps by the Gauss-Newton Hessian on the free variables; plain BB gradient steps otherwise.
  // The horizon problem is ill-conditioned (w_tau small), so unscaled steps stall within the budget.
  bool gauss_newton = true;

  Scalar dt() const { return horizon / Scalar(steps); }

  void validate() const {
    if (!(horizon > Scalar(0)) || steps < 2) throw std::invalid_argument("MpcConfig: need horizon > 0 and steps >= 2");
    if (!(w_theta > Scalar(0)) || !(w_tau > Scalar(0))) throw std::invalid_argument("MpcConfig: weights must be > 0");
    if (!(theta_min < theta_max) || !(theta_dot_min < theta_dot_max) || !(tau_min < tau_max)) {
      throw std::invalid_argument("MpcConfig: bounds must satisfy min < max");
    }
    if (gradient_iterations < 1 || multiplier_updates < 0) throw std::invalid_argument("MpcConfig: iteration counts");
    if (!(penalty_init > Scalar(0)) || penalty_max < penalty_init || !(penalty_growth >= Scalar(1))) {
      throw std::invalid_argument("MpcConfig: penalty settings");
    }
    if (!(control_period > Scalar(0)) || control_period > dt()) {
      throw std::invalid_argument("MpcConfig: control period must be positive and at most the horizon step");
    }
  }
};

template <typename Scalar = double>
struct MpcInputs {
  JointState<Scalar> state;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> reference;  // theta_r at the N+1 horizon nodes
  Scalar tau_h_hat{0};  // held over the horizon
  Scalar mode{1};       // held over the horizon
  PlantParams<Scalar> params;
};

enum class SolveStatus { Converged, IterationLimit, Degraded };

template <typename Scalar = double>
struct HorizonSolution {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector torque;                                    // u[0..N-1]
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> states;  // x[0..N]
  Scalar cost{0};            // tracking + effort
  Scalar augmented_cost{0};  // including the adjoined constraint terms
  Scalar violation{0};       // largest state-constraint excess over the horizon
  int iterations = 0;
  SolveStatus status = SolveStatus::IterationLimit;
  std::vector<Scalar> cost_trace;  // augmented cost before and after every accepted gradient step
  bool monotone = true;            // cost_trace non-increasing within each multiplier epoch
};

/// Warm-start state carried between control steps.
template <typename Scalar = double>
struct SolverMemory {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using ConstraintMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, 4>;
  Vector torque;
  ConstraintMatrix multipliers;  // per node: theta_max, theta_min, theta_dot_max, theta_dot_min
  ConstraintMatrix penalties;
  Scalar step{1};
  bool initialized = false;

  void reset(const MpcConfig<Scalar>& c) {
    torque = Vector::Zero(c.steps);
    multipliers = ConstraintMatrix::Zero(c.steps, 4);
    penalties = ConstraintMatrix::Constant(c.steps, 4, c.penalty_init);
    step = c.step_init;
    initialized = false;
  }
};

/// One RK4 step of the prediction model, optionally with its Jacobians w.r.t. state and torque.
/// Same sign convention as the plant: J theta_ddot = u + tau_h - B theta_dot - tau_g sin(theta).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> discretize_dynamics(const Eigen::Matrix<Scalar, 2, 1>& x, const PlantParams<Scalar>& p,
                                                Scalar u, Scalar tau_h, Scalar dt,
                                                Eigen::Matrix<Scalar, 2, 2>* jac_x = nullptr,
                                                Eigen::Matrix<Scalar, 2, 1>* jac_u = nullptr) {
  using std::cos;
  using std::sin;
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
  const Scalar inv_j = Scalar(1) / p.inertia;
  const auto f = [&](const Vec2& s) {
    return Vec2(s(1), (u + tau_h - p.damping * s(1) - p.gravity_torque * sin(s(0))) * inv_j);
  };
  const Scalar h = dt;
  const Vec2 k1 = f(x);
  const Vec2 x2 = x + h / 2 * k1;
  const Vec2 k2 = f(x2);
  const Vec2 x3 = x + h / 2 * k2;
  const Vec2 k3 = f(x3);
  const Vec2 x4 = x + h * k3;
  const Vec2 k4 = f(x4);
  if (jac_x != nullptr || jac_u != nullptr) {
    const auto a = [&](const Vec2& s) {
      Mat2 m;
      m << Scalar(0), Scalar(1), -p.gravity_torque * cos(s(0)) * inv_j, -p.damping * inv_j;
      return m;
    };
    const Vec2 b(Scalar(0), inv_j);
    const Mat2 eye = Mat2::Identity();
    const Mat2 d1x = a(x);
    const Vec2 d1u = b;
    const Mat2 a2 = a(x2);
    const Mat2 d2x = a2 * (eye + h / 2 * d1x);
    const Vec2 d2u = a2 * (h / 2 * d1u) + b;
    const Mat2 a3 = a(x3);
    const Mat2 d3x = a3 * (eye + h / 2 * d2x);
    const Vec2 d3u = a3 * (h / 2 * d2u) + b;
    const Mat2 a4 = a(x4);
    const Mat2 d4x = a4 * (eye + h * d3x);
    const Vec2 d4u = a4 * (h * d3u) + b;
    if (jac_x) *jac_x = eye + h / 6 * (d1x + 2 * d2x + 2 * d3x + d4x);
    if (jac_u) *jac_u = h / 6 * (d1u + 2 * d2u + 2 * d3u + d4u);
  }
  return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

template <typename Scalar>
JointState<Scalar> discretize_dynamics(const JointState<Scalar>& s, const PlantParams<Scalar>& p, Scalar u,
                                       Scalar tau_h, Scalar dt) {
  return JointState<Scalar>::from_vector(discretize_dynamics<Scalar>(s.vector(), p, u, tau_h, dt));
}

template <typename Scalar = double>
struct CostBreakdown {
  Scalar tracking{0};
  Scalar effort{0};
  Scalar augmented{0};  // tracking + effort + constraint terms
  Scalar violation{0};
};

namespace detail {

// Inequality constraints c <= 0 on predicted state x_{k+1}.
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> state_constraints(const Eigen::Matrix<Scalar, 2, 1>& x, const MpcConfig<Scalar>& c) {
  return {x(0) - c.theta_max, c.theta_min - x(0), x(1) - c.theta_dot_max, c.theta_dot_min - x(1)};
}

// d c / d x for the four constraints, one row each.
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 2> state_constraint_jacobian() {
  Eigen::Matrix<Scalar, 4, 2> j;
  j << Scalar(1), Scalar(0), Scalar(-1), Scalar(0), Scalar(0), Scalar(1), Scalar(0), Scalar(-1);
  return j;
}

}  // namespace detail

/// Augmented horizon cost
///   sum_k m w_theta (theta_r[k+1] - theta[k+1])^2 + w_tau u[k]^2
///         + sum_{k,i} (max(0, mu + rho c)^2 - mu^2) / (2 rho)
/// and, when `gradient` is given, its exact derivative w.r.t. u by a backward adjoint sweep.
template <typename Scalar>
CostBreakdown<Scalar> horizon_cost(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& u, const MpcInputs<Scalar>& in,
                                   const MpcConfig<Scalar>& cfg,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 4>& multipliers,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 4>& penalties,
                                   Eigen::Matrix<Scalar, Eigen::Dynamic, 1>* gradient = nullptr,
                                   Eigen::Matrix<Scalar, 2, Eigen::Dynamic>* states = nullptr,
                                   Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>* hessian = nullptr) {
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
  const int n = cfg.steps;
  const Scalar dt = cfg.dt();
  const Scalar wt = in.mode * cfg.w_theta;
  const auto cj = detail::state_constraint_jacobian<Scalar>();

  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> xs(2, n + 1);
  std::vector<Mat2> fx;
  std::vector<Vec2> fu;
  if (hessian && !gradient) throw std::invalid_argument("horizon_cost: the Hessian needs the gradient sweep");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 4> active;
  if (hessian) active.setZero(n, 4);
  if (gradient) {
    fx.resize(static_cast<std::size_t>(n));
    fu.resize(static_cast<std::size_t>(n));
  }
  xs.col(0) = in.state.vector();
  for (int k = 0; k < n; ++k) {
    const Vec2 xk = xs.col(k);
    if (gradient) {
      xs.col(k + 1) = discretize_dynamics<Scalar>(xk, in.params, u(k), in.tau_h_hat, dt, &fx[std::size_t(k)],
                                                  &fu[std::size_t(k)]);
    } else {
      xs.col(k + 1) = discretize_dynamics<Scalar>(xk, in.params, u(k), in.tau_h_hat, dt);
    }
  }

  CostBreakdown<Scalar> out;
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> state_grad(2, n + 1);
  state_grad.setZero();
  for (int k = 0; k < n; ++k) {
    const Vec2 x = xs.col(k + 1);
    const Scalar e = in.reference(k + 1) - x(0);
    out.tracking += wt * e * e;
    out.effort += cfg.w_tau * u(k) * u(k);
    const Eigen::Matrix<Scalar, 4, 1> cval = detail::state_constraints(x, cfg);
    Vec2 g(-Scalar(2) * wt * e, Scalar(0));
    for (int i = 0; i < 4; ++i) {
      const Scalar mu = multipliers(k, i);
      const Scalar rho = penalties(k, i);
      const Scalar shifted = std::max(Scalar(0), mu + rho * cval(i));
      out.augmented += (shifted * shifted - mu * mu) / (Scalar(2) * rho);
      out.violation = std::max(out.violation, cval(i));
      if (shifted > Scalar(0)) {
        g += shifted * cj.row(i).transpose();
        if (hessian) active(k, i) = rho;
      }
    }
    state_grad.col(k + 1) = g;
  }
  out.augmented += out.tracking + out.effort;

  if (gradient) {
    gradient->resize(n);
    Vec2 lambda = state_grad.col(n);
    for (int k = n - 1; k >= 0; --k) {
      (*gradient)(k) = Scalar(2) * cfg.w_tau * u(k) + fu[std::size_t(k)].dot(lambda);
      if (k > 0) lambda = state_grad.col(k) + fx[std::size_t(k)].transpose() * lambda;
    }
  }
  if (hessian) {
    // Sensitivities of theta and theta_dot at node i+1 to u_j, then J^T W J.
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Mat st = Mat::Zero(n, n), sv = Mat::Zero(n, n);
    for (int j = 0; j < n; ++j) {
      Vec2 sens = fu[std::size_t(j)];
      for (int i = j; i < n; ++i) {
        st(i, j) = sens(0);
        sv(i, j) = sens(1);
        if (i + 1 < n) sens = fx[std::size_t(i + 1)] * sens;
      }
    }
    Mat h = Scalar(2) * wt * st.transpose() * st;
    h.diagonal().array() += Scalar(2) * cfg.w_tau;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 4; ++c) {
        if (active(i, c) > Scalar(0)) {
          const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> r = cj(c, 0) * st.row(i) + cj(c, 1) * sv.row(i);
          h += active(i, c) * r.transpose() * r;
        }
      }
    }
    *hessian = std::move(h);
  }
  if (states) *states = std::move(xs);
  using std::isfinite;
  if (!isfinite(out.augmented)) throw std::runtime_error("mpc: non-finite horizon cost");
  return out;
}

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> project(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& u,
                                                 const MpcConfig<Scalar>& c) {
  return u.cwiseMax(c.tau_min).cwiseMin(c.tau_max);
}

// Shifts a node sequence forward by `fraction` of a node, holding the last value.
template <typename Derived>
void shift_rows(Eigen::MatrixBase<Derived>& m, typename Derived::Scalar fraction) {
  const auto rows = m.rows();
  for (Eigen::Index k = 0; k + 1 < rows; ++k) m.row(k) += fraction * (m.row(k + 1) - m.row(k));
}

}  // namespace detail

/// Runs `outer` augmented-Lagrangian epochs, each with up to cfg.gradient_iterations projected
/// gradient steps for fixed multipliers followed by a multiplier/penalty update. `memory` carries
/// the iterate, multipliers, penalties and step size in and out.
template <typename Scalar>
HorizonSolution<Scalar> solve(const MpcInputs<Scalar>& in, const MpcConfig<Scalar>& cfg, SolverMemory<Scalar>& memory,
                              int outer) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (!in.state.finite()) throw std::invalid_argument("mpc: non-finite current state");
  if (in.reference.size() != cfg.steps + 1) {
    throw std::invalid_argument("mpc: reference window has " + std::to_string(in.reference.size()) +
                                " nodes, expected " + std::to_string(cfg.steps + 1));
  }
  if (!in.params.valid()) throw std::invalid_argument("mpc: invalid plant parameters");
  if (memory.torque.size() != cfg.steps) memory.reset(cfg);
  if (!memory.initialized) {
    using std::sin;
    const Scalar hold = in.params.gravity_torque * sin(in.state.theta) - in.tau_h_hat;
    memory.torque = Vector::Constant(cfg.steps, std::clamp(hold, cfg.tau_min, cfg.tau_max));
    memory.initialized = true;
  }

  HorizonSolution<Scalar> sol;
  Vector u = detail::project(memory.torque, cfg);
  Vector g;
  bool degraded = false;
  bool converged = false;
  const Scalar tiny = Scalar(1e-12);

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> hess;
  auto* hp = cfg.gauss_newton ? &hess : nullptr;
  // Newton direction on the variables not pinned at a torque bound; empty if none is free.
  const auto newton_direction = [&](const Vector& uu, const Vector& gg) {
    std::vector<int> free;
    for (int k = 0; k < cfg.steps; ++k) {
      const bool pinned = (uu(k) <= cfg.tau_min && gg(k) > Scalar(0)) || (uu(k) >= cfg.tau_max && gg(k) < Scalar(0));
      if (!pinned) free.push_back(k);
    }
    Vector d = Vector::Zero(cfg.steps);
    if (free.empty()) return d;
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> hf(nf, nf);
    Vector gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf(a) = gg(free[std::size_t(a)]);
      for (Eigen::Index b = 0; b < nf; ++b) hf(a, b) = hess(free[std::size_t(a)], free[std::size_t(b)]);
    }
    const Vector df = -hf.ldlt().solve(gf);
    for (Eigen::Index a = 0; a < nf; ++a) d(free[std::size_t(a)]) = df(a);
    return d;
  };

  for (int epoch = 0; epoch < std::max(outer, 1); ++epoch) {
    auto cost = horizon_cost<Scalar>(u, in, cfg, memory.multipliers, memory.penalties, &g, nullptr, hp);
    sol.cost_trace.push_back(cost.augmented);
    converged = false;
    for (int it = 0; it < cfg.gradient_iterations; ++it) {
      const Vector projected_step = detail::project<Scalar>(u - g, cfg) - u;
      if (projected_step.template lpNorm<Eigen::Infinity>() < cfg.gradient_tolerance) {
        converged = true;
        break;
      }
      Scalar alpha = memory.step;
      bool accepted = false;
      Vector u_try, g_try;
      CostBreakdown<Scalar> trial;
      if (cfg.gauss_newton) {
        const Vector d = newton_direction(u, g);
        if (d.allFinite() && g.dot(d) < Scalar(0)) {
          Scalar beta = Scalar(1);
          for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
            u_try = detail::project<Scalar>(u + beta * d, cfg);
            trial = horizon_cost<Scalar>(u_try, in, cfg, memory.multipliers, memory.penalties);
            if (trial.augmented <= cost.augmented + cfg.armijo * g.dot(u_try - u) && g.dot(u_try - u) <= Scalar(0)) {
              accepted = true;
              break;
            }
            beta *= Scalar(0.5);
          }
        }
      }
      for (int bt = 0; !accepted && bt < cfg.max_backtracks; ++bt) {
        u_try = detail::project<Scalar>(u - alpha * g, cfg);
        const Vector d = u_try - u;
        const Scalar decrease = g.dot(d);
        trial = horizon_cost<Scalar>(u_try, in, cfg, memory.multipliers, memory.penalties);
        if (trial.augmented <= cost.augmented + cfg.armijo * decrease) {
          accepted = true;
          break;
        }
        alpha *= Scalar(0.5);
      }
      if (!accepted) {
        degraded = true;
        break;
      }
      trial = horizon_cost<Scalar>(u_try, in, cfg, memory.multipliers, memory.penalties, &g_try, nullptr, hp);
      // Barzilai-Borwein step for the next iteration.
      const Vector s = u_try - u;
      const Vector y = g_try - g;
      const Scalar sy = s.dot(y);
      Scalar next = sy > tiny ? s.squaredNorm() / sy : alpha * Scalar(2);
      memory.step = std::clamp(next, cfg.step_min, cfg.step_max);
      if (trial.augmented > cost.augmented + tiny * (Scalar(1) + std::abs(cost.augmented))) sol.monotone = false;
      u = std::move(u_try);
      g = std::move(g_try);
      cost = trial;
      sol.cost_trace.push_back(cost.augmented);
      ++sol.iterations;
    }
    if (degraded) break;

    if (epoch < outer) {
      // Multiplier and penalty update from the predicted constraint values.
      Eigen::Matrix<Scalar, 2, Eigen::Dynamic> xs;
      horizon_cost<Scalar>(u, in, cfg, memory.multipliers, memory.penalties, nullptr, &xs);
      for (int k = 0; k < cfg.steps; ++k) {
        const auto c = detail::state_constraints<Scalar>(xs.col(k + 1), cfg);
        for (int i = 0; i < 4; ++i) {
          Scalar& mu = memory.multipliers(k, i);
          Scalar& rho = memory.penalties(k, i);
          mu = std::max(Scalar(0), mu + rho * c(i));
          if (c(i) > cfg.violation_tolerance) rho = std::min(rho * cfg.penalty_growth, cfg.penalty_max);
        }
      }
    }
  }

  memory.torque = u;
  sol.torque = u;
  const auto final_cost = horizon_cost<Scalar>(u, in, cfg, memory.multipliers, memory.penalties, nullptr, &sol.states);
  sol.cost = final_cost.tracking + final_cost.effort;
  sol.augmented_cost = final_cost.augmented;
  sol.violation = std::max(Scalar(0), final_cost.violation);
  sol.status = degraded ? SolveStatus::Degraded : (converged ? SolveStatus::Converged : SolveStatus::IterationLimit);
  return sol;
}

/// Standalone solve: iterates until the projected gradient vanishes and the state constraints
/// hold, or cfg.max_outer_iterations epochs. A warm start is shifted forward by one horizon node.
template <typename Scalar>
HorizonSolution<Scalar> solve(const MpcInputs<Scalar>& in, const MpcConfig<Scalar>& cfg,
                              const std::optional<HorizonSolution<Scalar>>& warm_start = std::nullopt) {
  cfg.validate();
  SolverMemory<Scalar> memory;
  memory.reset(cfg);
  if (warm_start && warm_start->torque.size() == cfg.steps) {
    memory.torque = warm_start->torque;
    detail::shift_rows(memory.torque, Scalar(1));
    memory.initialized = true;
  }
  HorizonSolution<Scalar> sol;
  int total_iterations = 0;
  std::vector<Scalar> trace;
  bool monotone = true;
  for (int epoch = 0; epoch < cfg.max_outer_iterations; ++epoch) {
    sol = solve(in, cfg, memory, 1);
    total_iterations += sol.iterations;
    trace.insert(trace.end(), sol.cost_trace.begin(), sol.cost_trace.end());
    monotone = monotone && sol.monotone;
    if (sol.status == SolveStatus::Degraded) break;
    if (sol.status == SolveStatus::Converged && sol.violation <= cfg.violation_tolerance) break;
  }
  sol.iterations = total_iterations;
  sol.cost_trace = std::move(trace);
  sol.monotone = monotone;
  return sol;
}

template <typename Scalar = double>
struct ControlDiagnostics {
  Scalar stage_cost{0};      // m w_theta (theta_r - theta)^2 + w_tau u0^2 at the current instant
  Scalar horizon_cost{0};    // tracking + effort over the horizon
  Scalar augmented_cost{0};  // horizon cost with the adjoined constraint terms
  Scalar violation{0};
  int iterations = 0;
  SolveStatus status = SolveStatus::IterationLimit;
  bool monotone = true;
};

template <typename Scalar = double>
struct ControlOutput {
  Scalar tau_e{0};
  ControlDiagnostics<Scalar> diagnostics;
};

/// Real-time iteration: shift the previous solution by one control period, run the fixed
/// iteration budget, apply the first torque.
template <typename Scalar>
ControlOutput<Scalar> control_step(const MpcInputs<Scalar>& in, const MpcConfig<Scalar>& cfg,
                                   SolverMemory<Scalar>& memory) {
  if (memory.torque.size() != cfg.steps) memory.reset(cfg);
  if (memory.initialized) {
    const Scalar fraction = cfg.control_period / cfg.dt();
    detail::shift_rows(memory.torque, fraction);
    detail::shift_rows(memory.multipliers, fraction);
    detail::shift_rows(memory.penalties, fraction);
  }
  const auto sol = solve(in, cfg, memory, cfg.multiplier_updates);
  ControlOutput<Scalar> out;
  out.tau_e = sol.torque(0);
  const Scalar e = in.reference(0) - in.state.theta;
  out.diagnostics.stage_cost = in.mode * cfg.w_theta * e * e + cfg.w_tau * out.tau_e * out.tau_e;
  out.diagnostics.horizon_cost = sol.cost;
  out.diagnostics.augmented_cost = sol.augmented_cost;
  out.diagnostics.violation = sol.violation;
  out.diagnostics.iterations = sol.iterations;
  out.diagnostics.status = sol.status;
  out.diagnostics.monotone = sol.monotone;
  return out;
}

/// Per-instance controller wrapper holding the solver memory.
template <typename Scalar = double>
class MpcController {
 public:
  explicit MpcController(MpcConfig<Scalar> cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    memory_.reset(cfg_);
  }

  ControlOutput<Scalar> step(const MpcInputs<Scalar>& in) { return control_step(in, cfg_, memory_); }
  void reset() { memory_.reset(cfg_); }

  const MpcConfig<Scalar>& config() const { return cfg_; }
  const SolverMemory<Scalar>& memory() const { return memory_; }

 private:
  MpcConfig<Scalar> cfg_;
  SolverMemory<Scalar> memory_;
};

}  // namespace aan
