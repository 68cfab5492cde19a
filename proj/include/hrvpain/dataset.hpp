// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hrvpain/hrv.hpp"
#include "hrvpain/qrs.hpp"
#include "hrvpain/signal.hpp"

namespace hrvpain {

/// One stimulus window. Exactly one of `features` (cached-feature mode) or
/// `samples_path` (raw-ECG mode) is set.
struct WindowRecord {
  std::string subject_id;
  Gender gender = Gender::Male;
  int age = 30;
  PainLabel label = PainLabel::NP;
  std::string window_id;
  std::optional<FeatureVector> features;
  std::optional<std::filesystem::path> samples_path;
  double sample_rate = 512.0;
};

enum class Provenance { BioVidCsv, SyntheticCohort };

struct SubjectInfo {
  std::string id;
  Gender gender;
  int age;
  std::array<std::size_t, 5> label_counts{};
};

struct Dataset {
  std::vector<WindowRecord> records;
  Provenance provenance = Provenance::BioVidCsv;

  /// Subjects in first-appearance order.
  std::vector<SubjectInfo> subjects() const;
  bool has_features() const;
};

/// Header of the cached-feature CSV layout.
inline constexpr const char* kFeatureCsvHeader =
    "subject_id,gender,age,pain_label,window_id,f1,f2,f3,f4,f5,f6";
/// Header of the raw-ECG CSV layout; `samples_path` is relative to the CSV.
inline constexpr const char* kRawCsvHeader =
    "subject_id,gender,age,pain_label,window_id,sample_rate,samples_path";

/// Loads either CSV layout, selected by its header. Row-level problems raise
/// DataError naming the 1-based line number.
Dataset load_dataset(const std::filesystem::path& path);

/// Writes the cached-feature layout (features must be present).
void write_feature_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Reads single-channel samples: one value per line, or the first column of
/// a CSV whose first line may be a header.
std::vector<double> read_samples(const std::filesystem::path& path);
void write_samples(const std::vector<double>& samples, const std::filesystem::path& path);

struct CohortOptions {
  std::size_t windows_per_class = 20;
  std::size_t beats_per_window = 10;
  /// Mean-IBI drop per pain level (ms).
  double ibi_shift_ms = 35.0;
  /// Between-subject spread of the baseline mean IBI (ms).
  double subject_spread_ms = 25.0;
  double sample_rate = 512.0;
  double noise_std = 0.02;
};

/// Generated cohort. Every window keeps its RR intervals so raw ECG can be
/// synthesised for it on demand.
struct SyntheticCohort {
  Dataset dataset;
  std::vector<std::vector<double>> rr_intervals_ms;
};

/// Balanced genders and age bins; mean IBI falls and variability shrinks
/// with the pain level. Features are computed from each window's IBIs.
SyntheticCohort generate_synthetic_cohort(std::size_t n_subjects, std::uint64_t seed,
                                          const CohortOptions& options = {});

/// Writes every window as a samples file under `dir/ecg/` plus a raw-layout
/// CSV at `dir/raw.csv`; returns the CSV path.
std::filesystem::path export_raw_cohort(const SyntheticCohort& cohort, std::uint64_t seed,
                                        const std::filesystem::path& dir,
                                        const CohortOptions& options = {});

struct ExtractionReject {
  std::string subject_id;
  std::string window_id;
  std::string reason;
};

struct ExtractionResult {
  Dataset dataset;  // cached-feature mode, one record per accepted window
  std::vector<ExtractionReject> rejects;
};

/// Runs QRS detection and HRV features over every raw window.
ExtractionResult extract_features(const Dataset& raw, const DetectorConfig& detector,
                                  const FeatureOptions& features);

}  // namespace hrvpain
