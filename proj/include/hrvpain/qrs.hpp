// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "hrvpain/signal.hpp"

namespace hrvpain {

/// Tunables of the Pan-Tompkins detector. Durations are converted to
/// samples using the record's sample rate.
struct DetectorConfig {
  double bandpass_low_hz = 5.0;
  double bandpass_high_hz = 15.0;
  double integration_window_ms = 150.0;
  double refractory_ms = 200.0;
  double twave_window_ms = 360.0;
  double searchback_factor = 1.66;
  double warmup_s = 2.0;
  double refine_margin_ms = 40.0;

  void validate() const;
};

/// Running estimates of one threshold stream.
struct DetectorState {
  double spk = 0;
  double npk = 0;
  double threshold1 = 0;
  double threshold2 = 0;
  double rr_avg1 = 0;
  double rr_avg2 = 0;
  long last_qrs_index = -1;
  std::size_t refractory_samples = 1;
};

struct QrsResult {
  std::vector<std::size_t> r_indices;
  std::size_t searchback_count = 0;
  std::size_t rejected_twave_count = 0;
  std::size_t refractory_samples = 0;
};

/// Every intermediate of the pre-processing cascade, all of equal length.
struct PanTompkinsStages {
  std::vector<double> bandpassed;
  std::vector<double> derivative;
  std::vector<double> squared;
  std::vector<double> integrated;
};

PanTompkinsStages preprocess(const EcgRecord& record, const DetectorConfig& config);

/// Applies one peak to the running estimates: signal peaks move spk, noise
/// peaks move npk, both with weight 1/8, then thresholds are recomputed.
DetectorState update_thresholds(DetectorState state, double peak_value, bool is_signal_peak);

/// Recomputes threshold1 = npk + (spk - npk)/4 and threshold2 = threshold1/2.
void recompute_thresholds(DetectorState& state);

enum class PeakKind { Qrs, TWave };

PeakKind discriminate_twave(std::size_t candidate_index, std::size_t last_qrs_index,
                            double slope_candidate, double slope_last_qrs, double sample_rate,
                            double twave_window_ms = 360.0);

/// Runs the full detector. Throws DataError for records shorter than the
/// warm-up and FlatLineError for zero-variance input.
QrsResult detect_qrs(const EcgRecord& record, const DetectorConfig& config = {});

}  // namespace hrvpain
