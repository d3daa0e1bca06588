#include "aan/filter.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numbers>
#include <random>
#include <vector>

using namespace aan;

namespace {

std::vector<double> tone(double freq, double amplitude, double fs, double seconds) {
  std::vector<double> x(static_cast<std::size_t>(fs * seconds));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq * i / fs);
  return x;
}

double tail_mean(const std::vector<double>& y, double fs, double from) {
  double acc = 0.0;
  std::size_t n = 0;
  for (auto i = static_cast<std::size_t>(from * fs); i < y.size(); ++i, ++n) acc += y[i];
  return acc / static_cast<double>(n);
}

}  // namespace

TEST_CASE("Butterworth sections have -3 dB at the cutoff and unity pass band") {
  const auto lp = SosFilter::butterworth_lowpass(4, 500.0, 2048.0);
  CHECK(lp.magnitude(500.0, 2048.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(lp.magnitude(0.0, 2048.0) == doctest::Approx(1.0).epsilon(1e-12));
  const auto hp = SosFilter::butterworth_highpass(4, 10.0, 2048.0);
  CHECK(hp.magnitude(10.0, 2048.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(hp.magnitude(0.0, 2048.0) < 1e-12);
  CHECK_THROWS_AS(SosFilter::butterworth_lowpass(3, 5.0, 500.0), std::invalid_argument);
}

TEST_CASE("DC input yields a vanishing envelope") {
  FilterSpec spec;
  const std::vector<double> dc(static_cast<std::size_t>(spec.sample_rate * 6.0), 3.0);
  const auto env = process_emg(dc, spec);
  for (auto i = static_cast<std::size_t>(5.0 * spec.sample_rate); i < env.size(); ++i) REQUIRE(env[i] < 1e-3);
}

TEST_CASE("50 Hz sine gives the rectified mean 2A/pi") {
  FilterSpec spec;
  const double a = 0.7;
  const auto env = process_emg(tone(50.0, a, spec.sample_rate, 8.0), spec);
  CHECK(tail_mean(env, spec.sample_rate, 4.0) == doctest::Approx(2.0 * a / std::numbers::pi).epsilon(0.05));
}

TEST_CASE("a 1000 Hz tone is attenuated by at least 20 dB at 4096 Hz sampling") {
  FilterSpec spec;
  spec.sample_rate = 4096.0;
  EnvelopeExtractor chain(spec);
  CHECK(chain.band_pass().magnitude(1000.0, spec.sample_rate) <= 0.1);

  auto clean = tone(50.0, 1.0, spec.sample_rate, 8.0);
  auto mixed = clean;
  const auto hf = tone(1000.0, 1.0, spec.sample_rate, 8.0);
  for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += hf[i];
  const double e_clean = tail_mean(process_emg(clean, spec), spec.sample_rate, 4.0);
  const double e_mixed = tail_mean(process_emg(mixed, spec), spec.sample_rate, 4.0);
  CHECK(std::abs(e_mixed - e_clean) <= 0.1 * e_clean);
}

TEST_CASE("envelope is non-negative after settling") {
  FilterSpec spec;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> raw(static_cast<std::size_t>(spec.sample_rate * 5.0));
  for (auto& v : raw) v = n(rng) * (1.0 + std::sin(0.01 * (&v - raw.data())));
  const auto env = process_emg(raw, spec);
  for (auto i = static_cast<std::size_t>(spec.settling_time() * spec.sample_rate); i < env.size(); ++i) {
    REQUIRE(env[i] >= 0.0);
  }
}

TEST_CASE("filter spec validation") {
  FilterSpec spec;
  spec.sample_rate = 900.0;  // high corner at 500 Hz violates Nyquist
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = {};
  spec.band_low_hz = 600.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = {};
  spec.envelope_cutoff_hz = -1.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  CHECK_NOTHROW(FilterSpec{}.validate());
}

TEST_CASE("optional mains notch removes 50 Hz") {
  FilterSpec spec;
  spec.mains_notch = true;
  const auto env = process_emg(tone(50.0, 1.0, spec.sample_rate, 8.0), spec);
  CHECK(tail_mean(env, spec.sample_rate, 5.0) < 0.05);
}
