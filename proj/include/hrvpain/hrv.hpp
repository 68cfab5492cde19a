// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hrvpain/signal.hpp"

namespace hrvpain {

struct IbiSeries {
  std::vector<double> ibis_ms;
};

/// Requires at least three R peaks; throws InsufficientBeatsError otherwise.
IbiSeries compute_ibis(std::span<const std::size_t> r_indices, double sample_rate);

enum class SdnnMode { Population, Sample };
enum class SlopeAxis { BeatIndex, CumulativeTime };

struct FeatureOptions {
  SdnnMode sdnn = SdnnMode::Population;
  SlopeAxis slope_axis = SlopeAxis::BeatIndex;
};

inline constexpr std::size_t kBaseFeatureCount = 6;

struct FeatureVector {
  double mean_ibi_ms = 0;
  double rmssd_ms = 0;
  double sdnn_ms = 0;
  double ibi_slope_ms_per_beat = 0;
  double sdnn_rmssd_ratio = 0;
  double heart_rate_bpm = 0;
  /// Set when RMSSD is zero and the ratio was emitted as 0.
  bool degenerate_ratio = false;
  std::optional<double> gender_feature;
  std::optional<double> age_feature;

  std::array<double, kBaseFeatureCount> base() const {
    return {mean_ibi_ms, rmssd_ms, sdnn_ms, ibi_slope_ms_per_beat, sdnn_rmssd_ratio,
            heart_rate_bpm};
  }
  /// Base features followed by gender then age, when present.
  std::vector<double> values() const;
  std::size_t size() const { return values().size(); }

  static FeatureVector from_base(std::span<const double> f);
};

FeatureVector compute_features(const IbiSeries& ibis, const FeatureOptions& options = {});

enum class AugmentMode { None, G, A, GA };

/// Male encodes as 0, Female as 1; age is appended in years.
FeatureVector augment_features(FeatureVector fv, AugmentMode mode, std::optional<Gender> gender,
                               std::optional<int> age);

std::size_t feature_dim(AugmentMode mode);

/// Row-major feature table, one row per sample.
using FeatureRows = std::vector<std::vector<double>>;

struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;

  /// Z-score statistics of `rows`. Zero-variance columns get divisor 1.
  static Normalizer fit(const FeatureRows& rows);
  FeatureRows apply(const FeatureRows& rows) const;
  std::vector<double> apply(std::span<const double> row) const;
};

struct NormalizedSets {
  FeatureRows train;
  FeatureRows apply;
  Normalizer stats;
};

NormalizedSets normalize_features(const FeatureRows& train_set, const FeatureRows& apply_set);

}  // namespace hrvpain
