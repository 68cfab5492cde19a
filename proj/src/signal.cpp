// SPDX-License-Identifier: Apache-2.0
#include "hrvpain/signal.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "hrvpain/error.hpp"

namespace hrvpain {

std::string_view to_string(Gender g) { return g == Gender::Male ? "M" : "F"; }

std::string_view to_string(PainLabel p) {
  switch (p) {
    case PainLabel::NP: return "NP";
    case PainLabel::P1: return "P1";
    case PainLabel::P2: return "P2";
    case PainLabel::P3: return "P3";
    case PainLabel::P4: return "P4";
  }
  return "?";
}

Gender parse_gender(std::string_view s) {
  if (s == "M" || s == "Male" || s == "m") return Gender::Male;
  if (s == "F" || s == "Female" || s == "f") return Gender::Female;
  throw DataError("unknown gender '" + std::string(s) + "'");
}

PainLabel parse_pain_label(std::string_view s) {
  static constexpr std::string_view names[] = {"NP", "P1", "P2", "P3", "P4"};
  for (int i = 0; i < 5; ++i) {
    if (s == names[i]) return static_cast<PainLabel>(i);
  }
  throw DataError("unknown pain label '" + std::string(s) + "'");
}

void EcgRecord::validate() const {
  if (samples.empty()) throw ConfigError("ECG record has no samples");
  if (!(sample_rate > 0)) throw ConfigError("ECG sample rate must be positive");
  if (age < kMinAge || age > kMaxAge) {
    throw ConfigError("age " + std::to_string(age) + " outside [20, 65]");
  }
}

void SyntheticEcgSpec::validate() const {
  if (rr_intervals_ms.empty()) throw ConfigError("synthetic ECG needs at least one RR interval");
  for (double rr : rr_intervals_ms) {
    if (!(rr >= 250.0)) throw ConfigError("RR interval below the 250 ms floor");
  }
  for (const WaveComponent* w : {&p, &q, &r, &s, &t}) {
    if (!(w->width_s > 0)) throw ConfigError("wave width must be positive");
  }
  if (!(noise_std >= 0)) throw ConfigError("noise_std must be >= 0");
  if (!(sample_rate > 0)) throw ConfigError("sample rate must be positive");
  if (!beat_scale.empty() && beat_scale.size() != rr_intervals_ms.size()) {
    throw ConfigError("beat_scale must have one entry per RR interval");
  }
}

SyntheticEcg generate_synthetic_ecg(const SyntheticEcgSpec& spec, std::uint64_t seed) {
  spec.validate();
  const double fs = spec.sample_rate;

  double total_ms = 0;
  for (double rr : spec.rr_intervals_ms) total_ms += rr;
  const auto n = static_cast<std::size_t>(std::llround(total_ms * fs / 1000.0));

  std::vector<double> r_times;
  r_times.reserve(spec.rr_intervals_ms.size());
  double t = spec.rr_intervals_ms[0] / 2000.0;
  r_times.push_back(t);
  for (std::size_t k = 1; k < spec.rr_intervals_ms.size(); ++k) {
    t += spec.rr_intervals_ms[k] / 1000.0;
    r_times.push_back(t);
  }

  SyntheticEcg out;
  out.record.sample_rate = fs;
  out.record.samples.assign(n, 0.0);
  auto& x = out.record.samples;

  for (std::size_t k = 0; k < r_times.size(); ++k) {
    const double scale = spec.beat_scale.empty() ? 1.0 : spec.beat_scale[k];
    for (const WaveComponent* w : {&spec.p, &spec.q, &spec.r, &spec.s, &spec.t}) {
      const double centre = r_times[k] + w->offset_s;
      // Bumps are negligible beyond five widths.
      const double reach = 5.0 * w->width_s;
      const auto lo = static_cast<long>(std::floor((centre - reach) * fs));
      const auto hi = static_cast<long>(std::ceil((centre + reach) * fs));
      for (long i = std::max(0L, lo); i <= hi && i < static_cast<long>(n); ++i) {
        const double d = (static_cast<double>(i) / fs - centre) / w->width_s;
        x[static_cast<std::size_t>(i)] += scale * w->amplitude * std::exp(-0.5 * d * d);
      }
    }
    out.r_indices.push_back(static_cast<std::size_t>(std::llround(r_times[k] * fs)));
  }

  if (spec.noise_std > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    for (double& v : x) v += noise(rng);
  }
  return out;
}

double rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0;
  for (double v : samples) acc += v * v;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;

  // Direct form I with zero initial state.
  std::vector<double> run(std::span<const double> x) const {
    std::vector<double> y(x.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x[i];
      y2 = y1;
      y1 = v;
      y[i] = v;
    }
    return y;
  }
};

// Butterworth (Q = 1/sqrt 2) sections from the bilinear transform.
Biquad butter_lowpass(double fc, double fs) {
  const double w0 = 2 * std::numbers::pi * fc / fs;
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double c = std::cos(w0);
  const double a0 = 1 + alpha;
  return {(1 - c) / 2 / a0, (1 - c) / a0, (1 - c) / 2 / a0, -2 * c / a0, (1 - alpha) / a0};
}

Biquad butter_highpass(double fc, double fs) {
  const double w0 = 2 * std::numbers::pi * fc / fs;
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double c = std::cos(w0);
  const double a0 = 1 + alpha;
  return {(1 + c) / 2 / a0, -(1 + c) / a0, (1 + c) / 2 / a0, -2 * c / a0, (1 - alpha) / a0};
}

}  // namespace

std::vector<double> bandpass_filter(std::span<const double> samples, double sample_rate,
                                    double low_hz, double high_hz) {
  if (!(sample_rate > 0)) throw ConfigError("sample rate must be positive");
  if (!(low_hz > 0 && low_hz < high_hz && high_hz < sample_rate / 2)) {
    throw ConfigError("band-pass cutoffs must satisfy 0 < low < high < fs/2");
  }
  const auto hp = butter_highpass(low_hz, sample_rate).run(samples);
  return butter_lowpass(high_hz, sample_rate).run(hp);
}

std::vector<double> derivative_filter(std::span<const double> samples, double sample_rate) {
  if (samples.size() < 5) throw ConfigError("derivative filter needs at least 5 samples");
  if (!(sample_rate > 0)) throw ConfigError("sample rate must be positive");
  const double k = sample_rate / 8.0;
  auto at = [&](std::ptrdiff_t i) { return samples[static_cast<std::size_t>(std::max<std::ptrdiff_t>(i, 0))]; };
  std::vector<double> y(samples.size());
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(samples.size()); ++n) {
    y[static_cast<std::size_t>(n)] = k * (2 * at(n) + at(n - 1) - at(n - 3) - 2 * at(n - 4));
  }
  return y;
}

std::vector<double> square_signal(std::span<const double> samples) {
  std::vector<double> y(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) y[i] = samples[i] * samples[i];
  return y;
}

std::vector<double> moving_window_integrate(std::span<const double> samples,
                                            std::size_t window_len) {
  if (window_len < 1) throw ConfigError("integration window must be at least one sample");
  std::vector<double> y(samples.size());
  if (samples.empty()) return y;
  const double n = static_cast<double>(window_len);
  // Summed directly per output so the result carries no accumulated drift.
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double sum = 0;
    for (std::size_t k = 0; k < window_len; ++k) sum += i >= k ? samples[i - k] : samples[0];
    y[i] = sum / n;
  }
  return y;
}

}  // namespace hrvpain
