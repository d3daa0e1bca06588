#include "aan/filter.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace aan {

namespace {

void check_frequency(double f, double fs, const char* what) {
  if (!(f > 0.0) || !(f < fs / 2.0)) {
    throw std::invalid_argument(std::string(what) + ": frequency " + std::to_string(f) +
                                " Hz must lie in (0, fs/2) for fs = " + std::to_string(fs) + " Hz");
  }
}

// Section Q values of an even-order Butterworth prototype.
std::vector<double> butterworth_q(int order) {
  if (order < 2 || order % 2 != 0) throw std::invalid_argument("butterworth order must be even and >= 2");
  std::vector<double> q;
  for (int k = 0; k < order / 2; ++k) {
    q.push_back(1.0 / (2.0 * std::cos(std::numbers::pi * (2.0 * k + 1.0) / (2.0 * order))));
  }
  return q;
}

}  // namespace

Biquad Biquad::lowpass(double fc, double fs, double q) {
  check_frequency(fc, fs, "lowpass");
  const double k = std::tan(std::numbers::pi * fc / fs);
  const double norm = 1.0 / (1.0 + k / q + k * k);
  const double b0 = k * k * norm;
  return Biquad({b0, 2.0 * b0, b0}, {2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm});
}

Biquad Biquad::highpass(double fc, double fs, double q) {
  check_frequency(fc, fs, "highpass");
  const double k = std::tan(std::numbers::pi * fc / fs);
  const double norm = 1.0 / (1.0 + k / q + k * k);
  return Biquad({norm, -2.0 * norm, norm}, {2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm});
}

Biquad Biquad::notch(double f0, double fs, double q) {
  check_frequency(f0, fs, "notch");
  const double w0 = 2.0 * std::numbers::pi * f0 / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double c = -2.0 * std::cos(w0) / a0;
  return Biquad({1.0 / a0, c, 1.0 / a0}, {c, (1.0 - alpha) / a0});
}

SosFilter SosFilter::butterworth_lowpass(int order, double fc, double fs) {
  std::vector<Biquad> s;
  for (double q : butterworth_q(order)) s.push_back(Biquad::lowpass(fc, fs, q));
  return SosFilter(std::move(s));
}

SosFilter SosFilter::butterworth_highpass(int order, double fc, double fs) {
  std::vector<Biquad> s;
  for (double q : butterworth_q(order)) s.push_back(Biquad::highpass(fc, fs, q));
  return SosFilter(std::move(s));
}

SosFilter& SosFilter::append(const SosFilter& other) {
  sections_.insert(sections_.end(), other.sections_.begin(), other.sections_.end());
  return *this;
}

std::vector<double> SosFilter::filter(std::span<const double> x) {
  std::vector<double> y;
  y.reserve(x.size());
  for (double v : x) y.push_back(process(v));
  return y;
}

double SosFilter::magnitude(double f, double fs) const {
  const std::complex<double> z = std::polar(1.0, -2.0 * std::numbers::pi * f / fs);  // z^-1
  std::complex<double> h = 1.0;
  for (const auto& s : sections_) {
    const auto num = s.b()[0] + s.b()[1] * z + s.b()[2] * z * z;
    const auto den = 1.0 + s.a()[0] * z + s.a()[1] * z * z;
    h *= num / den;
  }
  return std::abs(h);
}

double SosFilter::noise_power_gain(int samples) const {
  SosFilter copy(sections_);
  copy.reset();
  double energy = 0.0;
  for (int n = 0; n < samples; ++n) {
    const double y = copy.process(n == 0 ? 1.0 : 0.0);
    energy += y * y;
  }
  return energy;
}

void FilterSpec::validate() const {
  if (!(sample_rate > 0.0)) throw std::invalid_argument("FilterSpec: sample rate must be positive");
  if (!(band_low_hz > 0.0 && band_low_hz < band_high_hz)) {
    throw std::invalid_argument("FilterSpec: band corners must satisfy 0 < low < high");
  }
  if (!(band_high_hz < sample_rate / 2.0)) {
    throw std::invalid_argument("FilterSpec: sample rate " + std::to_string(sample_rate) +
                                " Hz violates Nyquist for the " + std::to_string(band_high_hz) + " Hz band edge");
  }
  if (!(envelope_cutoff_hz > 0.0 && envelope_cutoff_hz < sample_rate / 2.0)) {
    throw std::invalid_argument("FilterSpec: envelope cutoff out of range");
  }
  if (mains_notch && !(mains_hz > 0.0 && mains_hz < sample_rate / 2.0)) {
    throw std::invalid_argument("FilterSpec: notch frequency out of range");
  }
}

double FilterSpec::settling_time() const { return 2.0 / envelope_cutoff_hz; }

EnvelopeExtractor::EnvelopeExtractor(const FilterSpec& spec) : spec_(spec) {
  spec_.validate();
  band_ = SosFilter::butterworth_highpass(spec_.band_order, spec_.band_low_hz, spec_.sample_rate);
  band_.append(SosFilter::butterworth_lowpass(spec_.band_order, spec_.band_high_hz, spec_.sample_rate));
  if (spec_.mains_notch) band_.append(SosFilter({Biquad::notch(spec_.mains_hz, spec_.sample_rate, 30.0)}));
  envelope_ = SosFilter::butterworth_lowpass(spec_.envelope_order, spec_.envelope_cutoff_hz, spec_.sample_rate);
}

double EnvelopeExtractor::push(double raw) {
  const double y = envelope_.process(std::abs(band_.process(raw)));
  return y > 0.0 ? y : 0.0;
}

void EnvelopeExtractor::reset() {
  band_.reset();
  envelope_.reset();
}

std::vector<double> process_emg(std::span<const double> raw, const FilterSpec& spec) {
  EnvelopeExtractor chain(spec);
  std::vector<double> out;
  out.reserve(raw.size());
  for (double v : raw) out.push_back(chain.push(v));
  return out;
}

}  // namespace aan
