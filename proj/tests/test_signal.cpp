// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hrvpain/error.hpp"
#include "hrvpain/qrs.hpp"
#include "hrvpain/signal.hpp"

using namespace hrvpain;

namespace {

std::vector<double> sine(double f, double fs, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * std::numbers::pi * f * static_cast<double>(i) / fs);
  return x;
}

double steady_peak(const std::vector<double>& y, std::size_t skip) {
  double m = 0;
  for (std::size_t i = skip; i < y.size(); ++i) m = std::max(m, std::abs(y[i]));
  return m;
}

}  // namespace

TEST_CASE("synthetic ECG places R peaks from the RR list") {
  SyntheticEcgSpec spec;
  spec.rr_intervals_ms = {1000, 1000, 1000};
  spec.noise_std = 0;
  const auto ecg = generate_synthetic_ecg(spec, 1);
  REQUIRE(ecg.r_indices.size() == 3);
  CHECK(ecg.r_indices[1] - ecg.r_indices[0] == 512);
  CHECK(ecg.r_indices[2] - ecg.r_indices[1] == 512);
  for (auto r : ecg.r_indices) {
    CHECK(ecg.record.samples[r] == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("synthetic ECG is deterministic per seed") {
  SyntheticEcgSpec spec;
  spec.rr_intervals_ms = {800, 820, 790, 810};
  spec.noise_std = 0.05;
  const auto a = generate_synthetic_ecg(spec, 7);
  const auto b = generate_synthetic_ecg(spec, 7);
  const auto c = generate_synthetic_ecg(spec, 8);
  CHECK(a.record.samples == b.record.samples);
  CHECK(a.record.samples != c.record.samples);
}

TEST_CASE("noisy three-beat signal is recovered by the detector") {
  SyntheticEcgSpec spec;
  // Two seconds of lead-in beats feed the threshold warm-up.
  spec.rr_intervals_ms = {800, 820, 790, 800, 820, 790};
  spec.noise_std = 0.05;
  const auto ecg = generate_synthetic_ecg(spec, 3);
  const auto q = detect_qrs(ecg.record);
  const double tol = 0.025 * 512;
  for (std::size_t k = 3; k < 6; ++k) {
    bool found = false;
    for (auto r : q.r_indices) {
      found = found || std::abs(static_cast<double>(r) - static_cast<double>(ecg.r_indices[k])) <= tol;
    }
    CHECK(found);
  }
}

TEST_CASE("band-pass rejects DC") {
  std::vector<double> x(4096, 5.0);
  const auto y = bandpass_filter(x, 512, 5, 15);
  CHECK(std::abs(y.back()) < 1e-6);
}

TEST_CASE("band-pass keeps 10 Hz and attenuates 60 Hz") {
  const double fs = 512;
  const auto pass = bandpass_filter(sine(10, fs, 8192), fs, 5, 15);
  const auto stop = bandpass_filter(sine(60, fs, 8192), fs, 5, 15);
  const double g_pass = steady_peak(pass, 4096);
  const double g_stop = steady_peak(stop, 4096);
  CHECK(g_pass >= std::pow(10.0, -3.0 / 20.0));
  CHECK(g_pass <= 1.05);
  CHECK(g_stop <= 0.1);
}

TEST_CASE("derivative filter") {
  const double fs = 512;
  SUBCASE("constant input gives zero") {
    const auto y = derivative_filter(std::vector<double>(100, 3.0), fs);
    for (double v : y) CHECK(v == 0.0);
  }
  SUBCASE("ramp gives a constant proportional to the slope") {
    std::vector<double> a(100), b(100);
    for (std::size_t i = 0; i < 100; ++i) {
      a[i] = 0.5 * static_cast<double>(i);
      b[i] = 1.5 * static_cast<double>(i);
    }
    const auto ya = derivative_filter(a, fs);
    const auto yb = derivative_filter(b, fs);
    for (std::size_t i = 4; i < 100; ++i) {
      CHECK(ya[i] == doctest::Approx(ya[4]).epsilon(1e-12));
      CHECK(yb[i] == doctest::Approx(3.0 * ya[i]).epsilon(1e-12));
    }
    CHECK(ya[4] != 0.0);
  }
  SUBCASE("response grows with frequency over the low band") {
    double prev = 0;
    for (double f : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      const double g = steady_peak(derivative_filter(sine(f, fs, 4096), fs), 512);
      CHECK(g > prev);
      // Low-band gain is close to proportional: g(f)/f varies slowly.
      if (prev > 0) CHECK(g / prev == doctest::Approx(2.0).epsilon(0.05));
      prev = g;
    }
  }
  SUBCASE("too short input is rejected") {
    CHECK_THROWS_AS(derivative_filter(std::vector<double>(4, 1.0), fs), ConfigError);
  }
}

TEST_CASE("squaring") {
  CHECK(square_signal(std::vector<double>{-2, 3}) == std::vector<double>{4, 9});
  CHECK(square_signal(std::vector<double>(5, 0.0)) == std::vector<double>(5, 0.0));
}

TEST_CASE("moving-window integration") {
  SUBCASE("constant stays constant") {
    for (std::size_t n : {1, 5, 77}) {
      const auto y = moving_window_integrate(std::vector<double>(200, 2.5), n);
      for (double v : y) CHECK(v == doctest::Approx(2.5));
    }
  }
  SUBCASE("impulse becomes a plateau of height 1/N") {
    std::vector<double> x(50, 0.0);
    x[10] = 1.0;
    const auto y = moving_window_integrate(x, 8);
    for (std::size_t i = 0; i < 50; ++i) {
      const double want = (i >= 10 && i < 18) ? 1.0 / 8 : 0.0;
      CHECK(y[i] == doctest::Approx(want));
    }
  }
  SUBCASE("window 1 is the identity") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    std::vector<double> x(300);
    for (auto& v : x) v = nd(rng);
    CHECK(moving_window_integrate(x, 1) == x);
  }
}

TEST_CASE("filters are linear") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  std::vector<double> a(1000), b(1000), ab(1000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = nd(rng);
    b[i] = nd(rng);
    ab[i] = 2.0 * a[i] - 0.5 * b[i];
  }
  const auto fa = bandpass_filter(a, 512, 5, 15);
  const auto fb = bandpass_filter(b, 512, 5, 15);
  const auto fab = bandpass_filter(ab, 512, 5, 15);
  const auto da = derivative_filter(a, 512);
  const auto db = derivative_filter(b, 512);
  const auto dab = derivative_filter(ab, 512);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(fab[i] == doctest::Approx(2.0 * fa[i] - 0.5 * fb[i]).epsilon(1e-9).scale(1.0));
    CHECK(dab[i] == doctest::Approx(2.0 * da[i] - 0.5 * db[i]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("record validation") {
  EcgRecord r;
  r.samples = {1, 2, 3};
  CHECK_NOTHROW(r.validate());
  r.sample_rate = 0;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r.sample_rate = 512;
  r.age = 19;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r.age = 30;
  r.samples.clear();
  CHECK_THROWS_AS(r.validate(), ConfigError);
}
