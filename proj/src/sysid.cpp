#include "aan/sysid.hpp"

#include "aan/config.hpp"
#include "aan/filter.hpp"
#include "aan/hte.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace aan {

void SysIdConfig::validate() const {
  if (!(gain > 0.0)) throw std::invalid_argument("sysid: proportional gain K must be > 0");
  if (frequencies.empty()) throw std::invalid_argument("sysid: at least one excitation frequency");
  auto sorted = frequencies;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(sorted[i] > 0.0)) throw std::invalid_argument("sysid: frequencies must be positive");
    if (i > 0 && sorted[i] == sorted[i - 1]) throw std::invalid_argument("sysid: frequencies must be distinct");
  }
  if (!(sample_rate > 0.0) || !(duration > trim + 0.1) || trim < 0.0 || fade_in < 0.0) {
    throw std::invalid_argument("sysid: need sample_rate > 0 and duration > trim");
  }
  if (!(derivative_cutoff > 0.0) || derivative_cutoff >= sample_rate / 2.0) {
    throw std::invalid_argument("sysid: derivative cutoff must lie below Nyquist");
  }
  if (substeps < 1) throw std::invalid_argument("sysid: substeps must be >= 1");
  if (torque_noise < 0.0) throw std::invalid_argument("sysid: torque noise must be >= 0");
}

std::size_t IdDataset::used_rows() const { return static_cast<std::size_t>(std::count(used.begin(), used.end(), 1)); }

namespace {

// Seven-point central stencils, O(h^6).
double first_derivative(const std::vector<double>& f, std::size_t i, double h) {
  return (-f[i - 3] + 9 * f[i - 2] - 45 * f[i - 1] + 45 * f[i + 1] - 9 * f[i + 2] + f[i + 3]) / (60 * h);
}
double second_derivative(const std::vector<double>& f, std::size_t i, double h) {
  return (2 * f[i - 3] - 27 * f[i - 2] + 270 * f[i - 1] - 490 * f[i] + 270 * f[i + 1] - 27 * f[i + 2] + 2 * f[i + 3]) /
         (180 * h * h);
}

struct Reference {
  double amplitude, offset, omega, fade;
  // Amplitude fades in so the loop starts at rest without exciting its resonance.
  double envelope(double t) const {
    if (fade <= 0.0 || t >= fade) return 1.0;
    return 0.5 - 0.5 * std::cos(std::numbers::pi * t / fade);
  }
  double operator()(double t) const { return offset - amplitude * envelope(t) * std::cos(omega * t); }
};

// Static balance K(theta_r - theta) = tau_g sin(theta).
double equilibrium(double theta_r, double gain, double tau_g) {
  double th = theta_r;
  for (int i = 0; i < 50; ++i) {
    const double f = gain * (theta_r - th) - tau_g * std::sin(th);
    const double df = -gain - tau_g * std::cos(th);
    const double step = f / df;
    th -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return th;
}

}  // namespace

IdDataset run_excitation(const PlantParams<double>& params, const SysIdConfig& config, const TorqueScript& tau_h) {
  if (!params.valid()) throw std::invalid_argument("run_excitation: invalid plant parameters");
  config.validate();

  const double h = config.dt();
  const auto n = static_cast<std::size_t>(std::llround(config.duration * config.sample_rate));
  const auto trim = static_cast<std::size_t>(std::llround(config.trim * config.sample_rate));
  IdDataset d;

  for (std::size_t trial = 0; trial < config.frequencies.size(); ++trial) {
    const Reference ref{config.amplitude, config.offset, 2.0 * std::numbers::pi * config.frequencies[trial],
                        config.fade_in};
    const double t0 = static_cast<double>(d.size()) * h;
    auto human = [&](double t) { return tau_h ? tau_h(t0 + t) : 0.0; };
    auto rhs = [&](double t, const Eigen::Vector2d& x) {
      const double u = config.gain * (ref(t) - x(0));
      return Eigen::Vector2d(x(1), joint_acceleration(JointState<double>{x(0), x(1)}, params, u, human(t)));
    };

    Eigen::Vector2d x(equilibrium(ref(0.0), config.gain, params.gravity_torque), 0.0);
    std::vector<double> theta(n), tau(n), theta_r(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) * h;
      if (!x.allFinite() || std::abs(x(0)) > config.divergence_limit) {
        throw std::runtime_error("run_excitation: trajectory diverged at " + std::to_string(config.frequencies[trial]) +
                                 " Hz, t=" + std::to_string(t) + " s (theta=" + std::to_string(x(0)) +
                                 "); reduce the gain K=" + std::to_string(config.gain));
      }
      theta_r[k] = ref(t);
      theta[k] = x(0);
      tau[k] = config.gain * (theta_r[k] - x(0));
      const double hs = h / config.substeps;
      for (int s = 0; s < config.substeps; ++s) {
        const double ts = t + s * hs;
        const auto k1 = rhs(ts, x);
        const auto k2 = rhs(ts + hs / 2, x + hs / 2 * k1);
        const auto k3 = rhs(ts + hs / 2, x + hs / 2 * k2);
        const auto k4 = rhs(ts + hs, x + hs * k3);
        x += hs / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      }
    }

    for (std::size_t k = 0; k < n; ++k) {
      d.t.push_back(t0 + static_cast<double>(k) * h);
      d.theta_r.push_back(theta_r[k]);
      d.theta.push_back(theta[k]);
      d.tau_e.push_back(tau[k]);
      d.trial.push_back(static_cast<int>(trial));
    }
  }

  if (config.torque_noise > 0.0) {
    double ss = 0.0;
    for (double v : d.tau_e) ss += v * v;
    const double sigma = config.torque_noise * std::sqrt(ss / static_cast<double>(d.size()));
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& v : d.tau_e) v += noise(rng);
  }

  // The same low-pass acts on every signal in the balance, so the filtered signals obey it too.
  const std::size_t total = d.size();
  d.theta_f.assign(total, 0.0);
  d.sin_theta_f.assign(total, 0.0);
  d.tau_e_f.assign(total, 0.0);
  d.theta_dot.assign(total, 0.0);
  d.theta_ddot.assign(total, 0.0);
  d.used.assign(total, 0);
  for (std::size_t trial = 0; trial < config.frequencies.size(); ++trial) {
    const std::size_t begin = trial * n;
    auto lp_theta = SosFilter::butterworth_lowpass(config.derivative_order, config.derivative_cutoff, config.sample_rate);
    auto lp_sin = lp_theta, lp_tau = lp_theta;
    for (std::size_t k = begin; k < begin + n; ++k) {
      d.theta_f[k] = lp_theta.process(d.theta[k]);
      d.sin_theta_f[k] = lp_sin.process(std::sin(d.theta[k]));
      d.tau_e_f[k] = lp_tau.process(d.tau_e[k]);
    }
    for (std::size_t k = begin + 3; k + 3 < begin + n; ++k) {
      d.theta_dot[k] = first_derivative(d.theta_f, k, h);
      d.theta_ddot[k] = second_derivative(d.theta_f, k, h);
      d.used[k] = k >= begin + std::max<std::size_t>(trim, 3) ? 1 : 0;
    }
  }
  return d;
}

FitReport fit_params(const IdDataset& data) {
  const std::size_t rows = data.used_rows();
  if (rows < 3) throw std::invalid_argument("fit_params: dataset has fewer than 3 usable rows");
  Eigen::MatrixXd X(rows, 3);
  Eigen::VectorXd y(rows);
  for (std::size_t k = 0, r = 0; k < data.size(); ++k) {
    if (!data.used[k]) continue;
    X.row(r) << data.theta_ddot[k], data.theta_dot[k], data.sin_theta_f[k];
    y(r) = data.tau_e_f[k];
    ++r;
  }

  static const char* kNames[3] = {"J (inertia)", "B (damping)", "tau_g (gravity torque)"};
  const Eigen::Vector3d norms = X.colwise().norm();
  const double scale = std::max(norms.maxCoeff(), 1e-300);
  for (int c = 0; c < 3; ++c) {
    if (norms(c) <= 1e-9 * scale) {
      throw RankDeficientError(kNames[c], std::string("fit_params: ") + kNames[c] +
                                              " is unidentifiable, its regressor column is zero (no excitation)");
    }
  }
  // Column scaling keeps the rank test independent of units.
  const Eigen::MatrixXd Xs = X * norms.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) {
    const int worst = qr.colsPermutation().indices()(2);
    throw RankDeficientError(kNames[worst], std::string("fit_params: ") + kNames[worst] +
                                                " is unidentifiable, its regressor is collinear with the others");
  }
  const Eigen::Vector3d theta = norms.cwiseInverse().asDiagonal() * qr.solve(y);

  FitReport rep;
  rep.params = PlantParams<double>::from_vector(theta);
  rep.rows = rows;
  const Eigen::VectorXd res = y - X * theta;
  rep.rmse = std::sqrt(res.squaredNorm() / static_cast<double>(rows));
  rep.torque_rms = std::sqrt(y.squaredNorm() / static_cast<double>(rows));
  const double dof = std::max<double>(1.0, static_cast<double>(rows) - 3.0);
  const double sigma2 = res.squaredNorm() / dof;
  rep.covariance = sigma2 * (X.transpose() * X).inverse();
  rep.std_error = rep.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return rep;
}

HumanInference infer_human_params(const PlantParams<double>& combined, const PlantParams<double>& exo) {
  HumanInference out;
  out.params = combined - exo;
  const char* names[3] = {"J", "B", "tau_g"};
  const Eigen::Vector3d v = out.params.vector();
  for (int i = 0; i < 3; ++i) {
    if (v(i) < 0.0) {
      out.non_physical = true;
      if (!out.warning.empty()) out.warning += "; ";
      out.warning += std::string("negative human ") + names[i] + " = " + format_double(v(i));
    }
  }
  return out;
}

void write_dataset_csv(const IdDataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset CSV " + path.string());
  out << "t,trial,theta_r,theta,tau_e,theta_f,theta_dot,theta_ddot,sin_theta_f,tau_e_f,used\n";
  for (std::size_t k = 0; k < d.size(); ++k) {
    out << format_double(d.t[k]) << ',' << d.trial[k] << ',' << format_double(d.theta_r[k]) << ','
        << format_double(d.theta[k]) << ',' << format_double(d.tau_e[k]) << ',' << format_double(d.theta_f[k]) << ','
        << format_double(d.theta_dot[k]) << ',' << format_double(d.theta_ddot[k]) << ','
        << format_double(d.sin_theta_f[k]) << ',' << format_double(d.tau_e_f[k]) << ',' << int(d.used[k]) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace aan
