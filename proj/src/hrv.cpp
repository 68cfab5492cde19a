// SPDX-License-Identifier: Apache-2.0
#include "hrvpain/hrv.hpp"

#include <cmath>
#include <string>

#include "hrvpain/error.hpp"

namespace hrvpain {

IbiSeries compute_ibis(std::span<const std::size_t> r_indices, double sample_rate) {
  if (!(sample_rate > 0)) throw ConfigError("sample rate must be positive");
  if (r_indices.size() < 3) {
    throw InsufficientBeatsError("need at least 3 R peaks, got " +
                                 std::to_string(r_indices.size()));
  }
  IbiSeries out;
  out.ibis_ms.reserve(r_indices.size() - 1);
  for (std::size_t k = 0; k + 1 < r_indices.size(); ++k) {
    if (r_indices[k + 1] <= r_indices[k]) throw DataError("R indices must be strictly increasing");
    out.ibis_ms.push_back(static_cast<double>(r_indices[k + 1] - r_indices[k]) / sample_rate *
                          1000.0);
  }
  return out;
}

std::vector<double> FeatureVector::values() const {
  const auto b = base();
  std::vector<double> v(b.begin(), b.end());
  if (gender_feature) v.push_back(*gender_feature);
  if (age_feature) v.push_back(*age_feature);
  return v;
}

FeatureVector FeatureVector::from_base(std::span<const double> f) {
  if (f.size() != kBaseFeatureCount) throw DataError("expected 6 base features");
  FeatureVector fv;
  fv.mean_ibi_ms = f[0];
  fv.rmssd_ms = f[1];
  fv.sdnn_ms = f[2];
  fv.ibi_slope_ms_per_beat = f[3];
  fv.sdnn_rmssd_ratio = f[4];
  fv.heart_rate_bpm = f[5];
  fv.degenerate_ratio = f[1] == 0;
  return fv;
}

FeatureVector compute_features(const IbiSeries& ibis, const FeatureOptions& options) {
  const auto& x = ibis.ibis_ms;
  const std::size_t n = x.size();
  if (n < 2) throw InsufficientBeatsError("need at least 2 IBIs");
  for (double v : x) {
    if (!(v > 0) || !std::isfinite(v)) throw DataError("IBIs must be positive and finite");
  }
  const double nd = static_cast<double>(n);

  FeatureVector fv;
  double sum = 0;
  for (double v : x) sum += v;
  fv.mean_ibi_ms = sum / nd;

  double ss = 0;
  for (double v : x) ss += (v - fv.mean_ibi_ms) * (v - fv.mean_ibi_ms);
  fv.sdnn_ms = std::sqrt(ss / (options.sdnn == SdnnMode::Population ? nd : nd - 1));

  double sd = 0;
  for (std::size_t k = 0; k + 1 < n; ++k) sd += (x[k + 1] - x[k]) * (x[k + 1] - x[k]);
  fv.rmssd_ms = std::sqrt(sd / (nd - 1));

  std::vector<double> t(n);
  if (options.slope_axis == SlopeAxis::BeatIndex) {
    for (std::size_t k = 0; k < n; ++k) t[k] = static_cast<double>(k);
  } else {
    double acc = 0;
    for (std::size_t k = 0; k < n; ++k) t[k] = (acc += x[k]) / 1000.0;
  }
  double tm = 0;
  for (double v : t) tm += v;
  tm /= nd;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < n; ++k) {
    sxy += (t[k] - tm) * (x[k] - fv.mean_ibi_ms);
    sxx += (t[k] - tm) * (t[k] - tm);
  }
  fv.ibi_slope_ms_per_beat = sxx > 0 ? sxy / sxx : 0.0;

  if (fv.rmssd_ms == 0) {
    fv.sdnn_rmssd_ratio = 0;
    fv.degenerate_ratio = true;
  } else {
    fv.sdnn_rmssd_ratio = fv.sdnn_ms / fv.rmssd_ms;
  }
  fv.heart_rate_bpm = 60000.0 / fv.mean_ibi_ms;
  return fv;
}

FeatureVector augment_features(FeatureVector fv, AugmentMode mode, std::optional<Gender> gender,
                               std::optional<int> age) {
  fv.gender_feature.reset();
  fv.age_feature.reset();
  const bool want_gender = mode == AugmentMode::G || mode == AugmentMode::GA;
  const bool want_age = mode == AugmentMode::A || mode == AugmentMode::GA;
  if (want_gender) {
    if (!gender) throw DataError("gender augmentation requested but gender is missing");
    fv.gender_feature = *gender == Gender::Female ? 1.0 : 0.0;
  }
  if (want_age) {
    if (!age) throw DataError("age augmentation requested but age is missing");
    fv.age_feature = static_cast<double>(*age);
  }
  return fv;
}

std::size_t feature_dim(AugmentMode mode) {
  switch (mode) {
    case AugmentMode::None: return 6;
    case AugmentMode::G:
    case AugmentMode::A: return 7;
    case AugmentMode::GA: return 8;
  }
  return 6;
}

Normalizer Normalizer::fit(const FeatureRows& rows) {
  if (rows.empty()) throw DataError("cannot fit normalisation on an empty training set");
  const std::size_t d = rows.front().size();
  Normalizer z;
  z.mean.assign(d, 0.0);
  z.std.assign(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw DataError("ragged feature rows");
    for (std::size_t j = 0; j < d; ++j) z.mean[j] += r[j];
  }
  const double n = static_cast<double>(rows.size());
  for (double& m : z.mean) m /= n;
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) z.std[j] += (r[j] - z.mean[j]) * (r[j] - z.mean[j]);
  }
  for (double& s : z.std) {
    s = std::sqrt(s / n);
    if (!(s > 0)) s = 1.0;
  }
  return z;
}

std::vector<double> Normalizer::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) throw DataError("feature row width does not match normaliser");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / std[j];
  return out;
}

FeatureRows Normalizer::apply(const FeatureRows& rows) const {
  FeatureRows out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(apply(std::span<const double>(r)));
  return out;
}

NormalizedSets normalize_features(const FeatureRows& train_set, const FeatureRows& apply_set) {
  NormalizedSets out;
  out.stats = Normalizer::fit(train_set);
  out.train = out.stats.apply(train_set);
  out.apply = out.stats.apply(apply_set);
  return out;
}

}  // namespace hrvpain
