#include "aan/hte.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace aan {

EmgFrame synth_emg(double tau_future, const HteModel<double>& model, double noise_level, std::mt19937_64& rng,
                   double t) {
  if (!model.valid()) throw std::invalid_argument("synth_emg: model requires a1 > 0 and a2 < 0");
  const double excess = tau_future - model.b0;
  EmgFrame f;
  f.timestamp = t;
  f.ch1 = std::max(0.0, excess) / model.a1;
  f.ch2 = std::max(0.0, -excess) / -model.a2;
  if (noise_level > 0.0) {
    std::normal_distribution<double> n(0.0, noise_level);
    f.ch1 = std::max(0.0, f.ch1 + n(rng));
    f.ch2 = std::max(0.0, f.ch2 + n(rng));
  }
  return f;
}

RawEmgSynthesizer::RawEmgSynthesizer(const FilterSpec& spec) {
  EnvelopeExtractor chain(spec);
  // Mean of |N(0, s^2)| is s*sqrt(2/pi); s^2 is the band-pass white-noise power gain.
  const double band_gain = chain.band_pass().noise_power_gain(static_cast<int>(4.0 * spec.sample_rate));
  gain_ = 1.0 / (std::sqrt(band_gain) * std::sqrt(2.0 / std::numbers::pi));
}

double RawEmgSynthesizer::sample(double envelope, std::mt19937_64& rng) { return envelope * gain_ * normal_(rng); }

std::vector<double> reference_torque(std::span<const double> relaxed, std::span<const double> condition,
                                     std::size_t samples_per_cycle) {
  if (relaxed.size() != condition.size()) {
    throw std::invalid_argument("reference_torque: length mismatch (" + std::to_string(relaxed.size()) + " vs " +
                                std::to_string(condition.size()) + ")");
  }
  const std::size_t n = relaxed.size();
  std::vector<double> out(n);
  if (samples_per_cycle == 0) {
    for (std::size_t i = 0; i < n; ++i) out[i] = relaxed[i] - condition[i];
    return out;
  }
  const std::size_t cycles = n / samples_per_cycle;
  if (cycles == 0) throw std::invalid_argument("reference_torque: signal shorter than one cycle");
  std::vector<double> mean_diff(samples_per_cycle, 0.0);
  for (std::size_t c = 0; c < cycles; ++c) {
    for (std::size_t i = 0; i < samples_per_cycle; ++i) {
      const std::size_t k = c * samples_per_cycle + i;
      mean_diff[i] += relaxed[k] - condition[k];
    }
  }
  for (double& v : mean_diff) v /= static_cast<double>(cycles);
  for (std::size_t i = 0; i < n; ++i) out[i] = mean_diff[i % samples_per_cycle];
  return out;
}

HteCalibration calibrate_hte(std::span<const EmgFrame> frames, std::span<const double> tau_hr, double k1,
                             double sample_rate) {
  if (frames.size() != tau_hr.size()) throw std::invalid_argument("calibrate_hte: frames and torque lengths differ");
  if (!(sample_rate > 0.0) || k1 < 0.0) throw std::invalid_argument("calibrate_hte: invalid k1 or sample rate");
  const auto shift = static_cast<std::size_t>(std::lround(k1 * sample_rate));
  if (frames.size() <= shift + 3) throw std::invalid_argument("calibrate_hte: fewer than 3 aligned samples");
  const std::size_t n = frames.size() - shift;

  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd target(n);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = frames[i].ch1;
    design(i, 2) = frames[i].ch2;
    target(i) = tau_hr[i + shift];
  }

  static constexpr const char* kNames[] = {"b0 (offset)", "a1 (ch1 extensor channel)", "a2 (ch2 flexor channel)"};
  for (int c = 1; c < 3; ++c) {
    if (design.col(c).cwiseAbs().maxCoeff() == 0.0) {
      throw RankDeficientError(kNames[c], std::string("calibrate_hte: rank-deficient design, ") + kNames[c] +
                                              " carries no signal");
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) {
    // The dependent column is the one pivoted last.
    const int col = qr.colsPermutation().indices()(2);
    throw RankDeficientError(kNames[col], std::string("calibrate_hte: rank-deficient design, ") + kNames[col] +
                                              " is not identifiable");
  }
  const Eigen::Vector3d coef = qr.solve(target);

  HteCalibration out;
  out.model = {coef(0), coef(1), coef(2)};
  out.samples = n;
  out.shift_samples = shift;
  const Eigen::VectorXd residual = design * coef - target;
  out.rmse = std::sqrt(residual.squaredNorm() / static_cast<double>(n));
  const double range = target.maxCoeff() - target.minCoeff();
  out.nrmse = range > 0.0 ? out.rmse / range : 0.0;
  return out;
}

double rmse(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size() || estimate.empty()) throw std::invalid_argument("rmse: bad lengths");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) acc += (estimate[i] - reference[i]) * (estimate[i] - reference[i]);
  return std::sqrt(acc / static_cast<double>(estimate.size()));
}

double nrmse(std::span<const double> estimate, std::span<const double> reference) {
  const auto [lo, hi] = std::minmax_element(reference.begin(), reference.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw std::invalid_argument("nrmse: reference torque has zero range");
  return rmse(estimate, reference) / range;
}

}  // namespace aan
