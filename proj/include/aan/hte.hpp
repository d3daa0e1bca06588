#pragma once

#include "aan/filter.hpp"

#include <Eigen/Core>

#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aan {

/// Processed two-channel EMG sample: ch1 vastus medialis (extensor), ch2 biceps femoris (flexor).
struct EmgFrame {
  double ch1 = 0.0;
  double ch2 = 0.0;
  double timestamp = 0.0;
};

/// Linear agonist-antagonist torque model: tau_hat(t + k1) = b0 + a1*ch1(t) + a2*ch2(t).
template <typename Scalar = double>
struct HteModel {
  Scalar b0{0};
  Scalar a1{1};  // extensor gain, > 0
  Scalar a2{-1};  // flexor gain, < 0

  bool valid() const { return a1 > Scalar(0) && a2 < Scalar(0); }
};

namespace presets {
inline constexpr HteModel<double> kHteS1{0.181, 206.2, -90.5};
inline constexpr HteModel<double> kHteS2{0.127, 163.8, -110.1};
inline constexpr HteModel<double> kHteS3{0.204, 181.7, -132.8};
}  // namespace presets

template <typename Scalar>
Scalar estimate_torque(Scalar ch1, Scalar ch2, const HteModel<Scalar>& model) {
  return model.b0 + model.a1 * ch1 + model.a2 * ch2;
}

inline double estimate_torque(const EmgFrame& frame, const HteModel<double>& model) {
  return estimate_torque(frame.ch1, frame.ch2, model);
}

/// Envelopes that the model maps back onto `tau_future`: positive torque about b0 drives the
/// extensor channel, negative the flexor. Noise is additive N(0, noise_level^2) per channel, then
/// clamped at zero.
EmgFrame synth_emg(double tau_future, const HteModel<double>& model, double noise_level, std::mt19937_64& rng,
                   double t = 0.0);

/// Generates raw surface-EMG samples as Gaussian noise amplitude-modulated by a target envelope.
/// The carrier gain is chosen so that the envelope chain returns the target envelope on average.
class RawEmgSynthesizer {
 public:
  explicit RawEmgSynthesizer(const FilterSpec& spec);

  double sample(double envelope, std::mt19937_64& rng);
  double carrier_gain() const { return gain_; }

 private:
  double gain_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Human reference torque from exoskeleton torque superposition: tau_hr = tau_e,R - tau_e,C.
/// With samples_per_cycle > 0 both profiles are averaged over complete cycles first and the
/// difference is tiled back to the input length.
std::vector<double> reference_torque(std::span<const double> tau_e_relaxed, std::span<const double> tau_e_condition,
                                     std::size_t samples_per_cycle = 0);

struct HteCalibration {
  HteModel<double> model;
  double rmse = 0.0;   // N m
  double nrmse = 0.0;  // rmse / (max tau_hr - min tau_hr)
  std::size_t samples = 0;
  std::size_t shift_samples = 0;
};

/// Thrown when a least-squares design matrix does not identify every parameter.
class RankDeficientError : public std::runtime_error {
 public:
  RankDeficientError(std::string parameter, const std::string& what)
      : std::runtime_error(what), parameter_(std::move(parameter)) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

/// Least-squares fit of (b0, a1, a2). Frame n is paired with tau_hr[n + round(k1 * sample_rate)].
HteCalibration calibrate_hte(std::span<const EmgFrame> frames, std::span<const double> tau_hr, double k1,
                             double sample_rate);

/// Root-mean-square error and its range-normalised form.
double rmse(std::span<const double> estimate, std::span<const double> reference);
double nrmse(std::span<const double> estimate, std::span<const double> reference);

}  // namespace aan
