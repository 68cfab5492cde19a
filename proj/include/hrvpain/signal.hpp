// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hrvpain {

enum class Gender { Male, Female };
enum class PainLabel { NP = 0, P1, P2, P3, P4 };

inline constexpr int kMinAge = 20;
inline constexpr int kMaxAge = 65;

std::string_view to_string(Gender g);
std::string_view to_string(PainLabel p);
/// Accepts "M"/"F" (also "Male"/"Female").
Gender parse_gender(std::string_view s);
PainLabel parse_pain_label(std::string_view s);

/// One stimulus window of single-lead ECG.
struct EcgRecord {
  std::vector<double> samples;
  double sample_rate = 512.0;
  std::string subject_id;
  Gender gender = Gender::Male;
  int age = 30;
  PainLabel pain_label = PainLabel::NP;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// A Gaussian bump placed relative to the R-wave instant.
struct WaveComponent {
  double offset_s;
  double amplitude;
  double width_s;
};

/// Sum-of-Gaussians PQRST model. The first R peak sits half of rr[0] into
/// the record and each later R peak follows the previous one by rr[k], so the
/// record length is sum(rr) and the IBIs are rr[1..].
struct SyntheticEcgSpec {
  std::vector<double> rr_intervals_ms;
  WaveComponent p{-0.16, 0.15, 0.025};
  WaveComponent q{-0.025, -0.12, 0.010};
  WaveComponent r{0.0, 1.0, 0.012};
  WaveComponent s{0.025, -0.20, 0.010};
  WaveComponent t{0.28, 0.30, 0.050};
  /// Per-beat multiplier on the whole complex; empty means all ones.
  std::vector<double> beat_scale;
  double noise_std = 0.0;
  double sample_rate = 512.0;

  void validate() const;
};

struct SyntheticEcg {
  EcgRecord record;
  std::vector<std::size_t> r_indices;
};

SyntheticEcg generate_synthetic_ecg(const SyntheticEcgSpec& spec, std::uint64_t seed);

/// RMS of `samples`; used to express synthetic noise as an SNR.
double rms(std::span<const double> samples);

/// Causal zero-state band-pass: a second-order Butterworth high-pass at
/// `low_hz` followed by a second-order Butterworth low-pass at `high_hz`,
/// both bilinear-transformed for `sample_rate`.
std::vector<double> bandpass_filter(std::span<const double> samples, double sample_rate,
                                    double low_hz, double high_hz);

/// Five-point derivative y[n] = fs/8 (2x[n] + x[n-1] - x[n-3] - 2x[n-4]).
/// Samples before the start are taken equal to x[0].
std::vector<double> derivative_filter(std::span<const double> samples, double sample_rate);

std::vector<double> square_signal(std::span<const double> samples);

/// Trailing mean over `window_len` samples; history before the start is x[0].
std::vector<double> moving_window_integrate(std::span<const double> samples,
                                            std::size_t window_len);

}  // namespace hrvpain
