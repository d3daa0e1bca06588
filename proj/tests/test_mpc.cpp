#include "aan/mpc.hpp"
#include "aan/plant.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

using namespace aan;

namespace {

const PlantParams<double> kS1 = presets::kExo + presets::kHumanS1;

MpcInputs<double> constant_reference(double theta_r, JointState<double> state, const MpcConfig<double>& cfg) {
  MpcInputs<double> in;
  in.state = state;
  in.params = kS1;
  in.reference = Eigen::VectorXd::Constant(cfg.steps + 1, theta_r);
  return in;
}

}  // namespace

TEST_CASE("prediction model shares the plant's fixed point and integrator") {
  const double u = kS1.gravity_torque * std::sin(0.7);
  const auto next = discretize_dynamics(JointState<double>{0.7, 0.0}, kS1, u, 0.0, 0.01);
  CHECK(std::abs(next.theta - 0.7) < 1e-15);
  CHECK(std::abs(next.theta_dot) < 1e-13);

  const JointState<double> s{0.7, 0.5};
  const auto model = discretize_dynamics(s, kS1, 5.0, 0.0, 0.01);
  const auto plant = step_dynamics(s, kS1, 5.0, 0.0, 0.01);
  CHECK(std::abs(model.theta - plant.theta) < 1e-4);
  CHECK(std::abs(model.theta_dot - plant.theta_dot) < 1e-4);
}

TEST_CASE("zero-torque rollout dissipates energy") {
  JointState<double> s{1.3, 1.0};
  double e = mechanical_energy(s, kS1);
  for (int k = 0; k < 200; ++k) {
    s = discretize_dynamics(s, kS1, 0.0, 0.0, 0.01);
    const double next = mechanical_energy(s, kS1);
    REQUIRE(next <= e + 1e-9);
    e = next;
  }
}

TEST_CASE("adjoint gradient matches central differences") {
  MpcConfig<double> cfg;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    MpcInputs<double> in;
    in.params = {0.2 + 0.3 * std::abs(uni(rng)), 0.1 + 0.1 * std::abs(uni(rng)), 5.0 + 10.0 * std::abs(uni(rng))};
    in.state = {0.7 + 0.6 * uni(rng), 2.0 * uni(rng)};
    in.mode = 0.5 + 0.5 * uni(rng);
    in.tau_h_hat = 8.0 * uni(rng);
    in.reference.resize(cfg.steps + 1);
    for (int k = 0; k <= cfg.steps; ++k) in.reference(k) = 0.7 + 0.5 * std::sin(0.1 * k + 3.0 * uni(rng));
    Eigen::VectorXd u(cfg.steps);
    for (int k = 0; k < cfg.steps; ++k) u(k) = 15.0 * uni(rng);
    Eigen::MatrixXd mult = Eigen::MatrixXd::Zero(cfg.steps, 4);
    Eigen::MatrixXd pen = Eigen::MatrixXd::Constant(cfg.steps, 4, cfg.penalty_init);
    for (int k = 0; k < cfg.steps; ++k) {
      for (int i = 0; i < 4; ++i) mult(k, i) = std::max(0.0, 50.0 * uni(rng));
    }
    Eigen::Matrix<double, Eigen::Dynamic, 4> mu = mult, rho = pen;

    Eigen::VectorXd g;
    horizon_cost(u, in, cfg, mu, rho, &g);
    Eigen::VectorXd fd(cfg.steps);
    const double h = 1e-6;
    for (int k = 0; k < cfg.steps; ++k) {
      Eigen::VectorXd up = u, dn = u;
      up(k) += h;
      dn(k) -= h;
      fd(k) = (horizon_cost(up, in, cfg, mu, rho).augmented - horizon_cost(dn, in, cfg, mu, rho).augmented) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  MESSAGE("worst relative gradient error " << worst);
  CHECK(worst < 1e-5);
}

TEST_CASE("two-step problem agrees with a brute-force grid search") {
  MpcConfig<double> cfg;
  cfg.steps = 2;
  cfg.horizon = 0.02;
  cfg.control_period = 0.002;
  cfg.w_theta = 1000.0;
  cfg.w_tau = 0.01;
  cfg.max_outer_iterations = 200;
  cfg.gradient_iterations = 200;
  MpcInputs<double> in;
  in.params = kS1;
  in.state = {0.6, 0.2};
  in.mode = 1.0;
  in.reference = Eigen::Vector3d(0.6, 0.605, 0.612);

  const auto sol = solve(in, cfg);

  // Oracle: exhaustive search over (u0, u1) at 0.01 N m, using the plant integrator.
  const auto cost = [&](double u0, double u1) {
    const auto x1 = step_dynamics(in.state, in.params, u0, 0.0, 0.01);
    const auto x2 = step_dynamics(x1, in.params, u1, 0.0, 0.01);
    const double e1 = in.reference(1) - x1.theta, e2 = in.reference(2) - x2.theta;
    return cfg.w_theta * (e1 * e1 + e2 * e2) + cfg.w_tau * (u0 * u0 + u1 * u1);
  };
  double best = INFINITY, b0 = 0.0, b1 = 0.0;
  for (int i = -500; i <= 2500; ++i) {
    for (int j = -500; j <= 2500; ++j) {
      const double c = cost(0.01 * i, 0.01 * j);
      if (c < best) best = c, b0 = 0.01 * i, b1 = 0.01 * j;
    }
  }
  MESSAGE("solver (" << sol.torque(0) << ", " << sol.torque(1) << ") grid (" << b0 << ", " << b1 << ")");
  CHECK(std::abs(sol.torque(0) - b0) <= 0.01 + 1e-9);
  CHECK(std::abs(sol.torque(1) - b1) <= 0.01 + 1e-9);
  CHECK(sol.violation <= 0.0);
}

TEST_CASE("steady holding torque balances gravity") {
  MpcConfig<double> cfg;
  MpcController<double> ctl(cfg);
  JointState<double> s{0.7, 0.0};
  double tau = 0.0;
  for (int k = 0; k < 1000; ++k) {
    auto in = constant_reference(0.7, s, cfg);
    tau = ctl.step(in).tau_e;
    s = step_dynamics(s, kS1, tau, 0.0, 0.002);
  }
  const double expected = 16.0096 * std::sin(0.7);
  CHECK(expected == doctest::Approx(10.31).epsilon(1e-3));
  CHECK(tau == doctest::Approx(expected).epsilon(0.05));
  CHECK(std::abs(s.theta - 0.7) < 0.01);
}

TEST_CASE("m = 0 with an interior state gives zero torque") {
  MpcConfig<double> cfg;
  auto in = constant_reference(1.2, {0.7, 0.0}, cfg);
  in.mode = 0.0;
  in.tau_h_hat = kS1.gravity_torque * std::sin(0.7);  // the limb holds itself
  const auto sol = solve(in, cfg);
  CHECK(sol.torque.lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(sol.violation <= 0.0);

  auto falling = constant_reference(1.2, {0.1, 0.0}, cfg);
  falling.mode = 0.0;
  CHECK(solve(falling, cfg).torque.lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("warm-started control steps settle on constant inputs") {
  MpcConfig<double> cfg;
  SolverMemory<double> mem;
  mem.reset(cfg);
  const auto in = constant_reference(0.9, {0.85, 0.1}, cfg);
  double prev = 0.0, change = INFINITY;
  for (int k = 0; k < 400; ++k) {
    const double u0 = control_step(in, cfg, mem).tau_e;
    change = std::abs(u0 - prev);
    prev = u0;
  }
  CHECK(change < 1e-6);
}

TEST_CASE("closed loop on a constant reference settles to a constant torque") {
  MpcConfig<double> cfg;
  MpcController<double> ctl(cfg);
  JointState<double> s{0.85, 0.1};
  double prev = 0.0, worst = 0.0;
  for (int k = 0; k < 3000; ++k) {
    const double u = ctl.step(constant_reference(0.9, s, cfg)).tau_e;
    if (k >= 2000) worst = std::max(worst, std::abs(u - prev));
    prev = u;
    s = step_dynamics(s, kS1, u, 0.0, 0.002);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("plain gradient steps still descend and reach the optimum") {
  MpcConfig<double> cfg;
  cfg.gauss_newton = false;
  cfg.max_outer_iterations = 200;
  cfg.gradient_iterations = 500;
  auto in = constant_reference(0.9, {0.85, 0.1}, cfg);
  const auto plain = solve(in, cfg);
  CHECK(plain.monotone);
  cfg.gauss_newton = true;
  const auto scaled = solve(in, cfg);
  CHECK(scaled.monotone);
  CHECK(std::abs(plain.torque(0) - scaled.torque(0)) < 1e-3);
  CHECK(scaled.augmented_cost <= plain.augmented_cost + 1e-9);
}

TEST_CASE("inner descent is monotone and torques stay within bounds") {
  MpcConfig<double> cfg;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int inst = 0; inst < 50; ++inst) {
    auto in = constant_reference(0.7 + 0.6 * uni(rng), {0.7 + 0.7 * uni(rng), 3.0 * uni(rng)}, cfg);
    in.mode = std::abs(uni(rng));
    in.tau_h_hat = 10.0 * uni(rng);
    const auto sol = solve(in, cfg);
    CHECK(sol.monotone);
    CHECK(sol.status != SolveStatus::Degraded);
    for (int k = 0; k < cfg.steps; ++k) {
      REQUIRE(sol.torque(k) >= cfg.tau_min);
      REQUIRE(sol.torque(k) <= cfg.tau_max);
    }
  }
}

TEST_CASE("far-off state saturates torque exactly at the bound") {
  MpcConfig<double> cfg;
  auto in = constant_reference(1.3, {0.1, 0.0}, cfg);
  const auto sol = solve(in, cfg);
  CHECK(sol.torque(0) == cfg.tau_max);
}

TEST_CASE("state constraints are enforced by the multiplier updates") {
  MpcConfig<double> cfg;
  // A reference far above the bound would drag theta past theta_max without the constraint.
  auto in = constant_reference(1.8, {1.3, 0.0}, cfg);
  const auto sol = solve(in, cfg);
  CHECK(sol.violation <= 10 * cfg.violation_tolerance);
  CHECK(sol.states.row(0).maxCoeff() <= cfg.theta_max + 10 * cfg.violation_tolerance);
}

TEST_CASE("invalid inputs are rejected") {
  MpcConfig<double> cfg;
  auto in = constant_reference(0.7, {0.7, 0.0}, cfg);
  in.reference.resize(5);
  CHECK_THROWS_AS(solve(in, cfg), std::invalid_argument);
  in = constant_reference(0.7, {NAN, 0.0}, cfg);
  CHECK_THROWS_AS(solve(in, cfg), std::invalid_argument);
  cfg.w_tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.theta_min = 2.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
