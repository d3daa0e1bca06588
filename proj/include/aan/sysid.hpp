#pragma once

#include "aan/plant.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace aan {

struct SysIdConfig {
  double gain = 80.0;  // K, N m / rad
  std::vector<double> frequencies{0.1, 0.2, 0.25, 0.5, 1.0};
  double duration = 20.0;     // s per frequency
  double amplitude = 0.5;     // rad
  double offset = 0.7;        // rad
  double fade_in = 2.0;       // s, raised-cosine amplitude ramp at the start of each trial
  double sample_rate = 500.0;
  int substeps = 4;  // RK4 steps per sample; the stiff closed loop needs them for 1e-6 recovery
  double derivative_cutoff = 5.0;  // Hz
  int derivative_order = 2;
  double trim = 2.0;          // s discarded at the start of each trial while the filter settles
  double torque_noise = 0.0;  // std of torque measurement noise, as a fraction of RMS tau_e
  std::uint64_t seed = 1;
  double divergence_limit = 100.0;  // |theta| in rad beyond which the trial is declared unstable

  double dt() const { return 1.0 / sample_rate; }
  void validate() const;
};

/// Concatenated excitation trials. The `*_f` columns are low-pass filtered; derivatives are
/// central differences of the filtered angle. Rows with used == 0 are excluded from fitting.
struct IdDataset {
  std::vector<double> t, theta_r, theta, tau_e;
  std::vector<double> theta_f, theta_dot, theta_ddot, sin_theta_f, tau_e_f;
  std::vector<int> trial;
  std::vector<char> used;

  std::size_t size() const { return t.size(); }
  std::size_t used_rows() const;
};

using TorqueScript = std::function<double(double t)>;

/// Proportional-control tracking of each sinusoidal reference; continuous-time loop tau_e = K(theta_r - theta).
IdDataset run_excitation(const PlantParams<double>& params, const SysIdConfig& config,
                         const TorqueScript& tau_h = nullptr);

struct FitReport {
  PlantParams<double> params;
  double rmse = 0.0;        // residual RMS, N m
  double torque_rms = 0.0;  // RMS of the regression target
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  Eigen::Vector3d std_error = Eigen::Vector3d::Zero();
  std::size_t rows = 0;
};

/// Least squares for (J, B, tau_g). Throws RankDeficientError naming an unidentifiable parameter.
FitReport fit_params(const IdDataset& data);

struct HumanInference {
  PlantParams<double> params;
  bool non_physical = false;  // some component came out negative
  std::string warning;
};

HumanInference infer_human_params(const PlantParams<double>& combined, const PlantParams<double>& exo);

void write_dataset_csv(const IdDataset& data, const std::filesystem::path& path);

}  // namespace aan
