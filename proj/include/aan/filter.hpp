#pragma once

#include <array>
#include <span>
#include <vector>

namespace aan {

/// Second-order IIR section, transposed direct form II. a0 is normalised to 1.
class Biquad {
 public:
  Biquad() = default;
  Biquad(std::array<double, 3> b, std::array<double, 2> a) : b_(b), a_(a) {}

  static Biquad lowpass(double cutoff_hz, double sample_rate, double q);
  static Biquad highpass(double cutoff_hz, double sample_rate, double q);
  static Biquad notch(double center_hz, double sample_rate, double q);

  double process(double x) {
    const double y = b_[0] * x + z1_;
    z1_ = b_[1] * x - a_[0] * y + z2_;
    z2_ = b_[2] * x - a_[1] * y;
    return y;
  }
  void reset() { z1_ = z2_ = 0.0; }

  const std::array<double, 3>& b() const { return b_; }
  const std::array<double, 2>& a() const { return a_; }

 private:
  std::array<double, 3> b_{1.0, 0.0, 0.0};
  std::array<double, 2> a_{0.0, 0.0};
  double z1_ = 0.0, z2_ = 0.0;
};

/// Cascade of biquads. Butterworth designs of even order are built from order/2 sections.
class SosFilter {
 public:
  SosFilter() = default;
  explicit SosFilter(std::vector<Biquad> sections) : sections_(std::move(sections)) {}

  static SosFilter butterworth_lowpass(int order, double cutoff_hz, double sample_rate);
  static SosFilter butterworth_highpass(int order, double cutoff_hz, double sample_rate);

  double process(double x) {
    for (auto& s : sections_) x = s.process(x);
    return x;
  }
  void reset() {
    for (auto& s : sections_) s.reset();
  }
  /// Cascades `other` after this filter.
  SosFilter& append(const SosFilter& other);

  std::vector<double> filter(std::span<const double> x);
  /// Complex magnitude of the frequency response at f (Hz).
  double magnitude(double f_hz, double sample_rate) const;
  /// Sum of squared impulse-response samples, i.e. the white-noise power gain.
  double noise_power_gain(int samples) const;

  const std::vector<Biquad>& sections() const { return sections_; }

 private:
  std::vector<Biquad> sections_;
};

/// EMG envelope chain settings.
struct FilterSpec {
  double band_low_hz = 10.0;
  double band_high_hz = 500.0;
  int band_order = 4;  // order of each band edge
  double envelope_cutoff_hz = 2.0;
  int envelope_order = 2;
  double sample_rate = 2048.0;
  bool mains_notch = false;  // optional 50 Hz notch
  double mains_hz = 50.0;

  void validate() const;  // throws std::invalid_argument
  /// Time after which the envelope is considered settled: four envelope-cutoff half periods.
  double settling_time() const;
};

/// Streaming band-pass -> full-wave rectify -> low-pass chain for one EMG channel.
/// The output is clamped at zero since Butterworth low-pass ringing can dip slightly below it.
class EnvelopeExtractor {
 public:
  explicit EnvelopeExtractor(const FilterSpec& spec);

  double push(double raw);
  void reset();

  const FilterSpec& spec() const { return spec_; }
  const SosFilter& band_pass() const { return band_; }

 private:
  FilterSpec spec_;
  SosFilter band_;
  SosFilter envelope_;
};

std::vector<double> process_emg(std::span<const double> raw, const FilterSpec& spec);

}  // namespace aan
