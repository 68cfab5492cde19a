// SPDX-License-Identifier: Apache-2.0
#include "hrvpain/qrs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "hrvpain/error.hpp"

namespace hrvpain {

void DetectorConfig::validate() const {
  if (!(bandpass_low_hz > 0 && bandpass_low_hz < bandpass_high_hz)) {
    throw ConfigError("detector band edges must satisfy 0 < low < high");
  }
  if (!(integration_window_ms > 0)) throw ConfigError("integration window must be positive");
  if (!(refractory_ms > 0)) throw ConfigError("refractory period must be positive");
  if (!(twave_window_ms >= 0)) throw ConfigError("T-wave window must be >= 0");
  if (!(searchback_factor > 1)) throw ConfigError("search-back factor must exceed 1");
  if (!(warmup_s > 0)) throw ConfigError("warm-up must be positive");
  if (!(refine_margin_ms >= 0)) throw ConfigError("refinement margin must be >= 0");
}

namespace {

std::size_t ms_to_samples(double ms, double fs) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ms * fs / 1000.0)));
}

double max_abs(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
  double m = 0;
  for (std::size_t i = lo; i <= hi && i < x.size(); ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

struct Candidate {
  std::size_t index;
  double integrated;  // peak of the integrated stream
  double filtered;    // peak |band-passed| over the integration window
  double slope;       // peak |derivative| over the integration window
};

// Local maxima of the integrated signal that dominate a +-radius neighbourhood.
// Ties keep the earliest sample.
std::vector<std::size_t> integrated_peaks(const std::vector<double>& mwi, std::size_t radius) {
  std::vector<std::size_t> peaks;
  const std::size_t n = mwi.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1])) continue;
    bool dominant = true;
    const std::size_t lo = i > radius ? i - radius : 0;
    const std::size_t hi = std::min(n - 1, i + radius);
    for (std::size_t j = lo; j < i && dominant; ++j) dominant = mwi[j] < mwi[i];
    for (std::size_t j = i + 1; j <= hi && dominant; ++j) dominant = mwi[j] <= mwi[i];
    if (dominant) peaks.push_back(i);
  }
  return peaks;
}

class RrTracker {
 public:
  void add(double rr) {
    push(recent_, rr);
    avg1_ = mean(recent_);
    if (selected_.empty() || (rr >= 0.92 * avg2_ && rr <= 1.16 * avg2_)) {
      push(selected_, rr);
      avg2_ = mean(selected_);
      irregular_ = 0;
    } else if (++irregular_ >= kSpan) {
      // Persistent rhythm change: restart the selective average.
      selected_ = recent_;
      avg2_ = avg1_;
      irregular_ = 0;
    }
  }
  double avg1() const { return avg1_; }
  double avg2() const { return avg2_; }

 private:
  static constexpr std::size_t kSpan = 8;
  static void push(std::deque<double>& q, double v) {
    q.push_back(v);
    if (q.size() > kSpan) q.pop_front();
  }
  static double mean(const std::deque<double>& q) {
    return std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(q.size());
  }
  std::deque<double> recent_, selected_;
  double avg1_ = 0, avg2_ = 0;
  std::size_t irregular_ = 0;
};

}  // namespace

PanTompkinsStages preprocess(const EcgRecord& record, const DetectorConfig& config) {
  config.validate();
  PanTompkinsStages st;
  st.bandpassed = bandpass_filter(record.samples, record.sample_rate, config.bandpass_low_hz,
                                  config.bandpass_high_hz);
  st.derivative = derivative_filter(st.bandpassed, record.sample_rate);
  st.squared = square_signal(st.derivative);
  st.integrated = moving_window_integrate(
      st.squared, ms_to_samples(config.integration_window_ms, record.sample_rate));
  return st;
}

void recompute_thresholds(DetectorState& state) {
  state.threshold1 = state.npk + 0.25 * (state.spk - state.npk);
  state.threshold2 = 0.5 * state.threshold1;
}

DetectorState update_thresholds(DetectorState state, double peak_value, bool is_signal_peak) {
  if (!(peak_value >= 0)) throw ConfigError("peak value must be non-negative");
  if (is_signal_peak) {
    state.spk = 0.125 * peak_value + 0.875 * state.spk;
  } else {
    state.npk = 0.125 * peak_value + 0.875 * state.npk;
  }
  recompute_thresholds(state);
  return state;
}

PeakKind discriminate_twave(std::size_t candidate_index, std::size_t last_qrs_index,
                            double slope_candidate, double slope_last_qrs, double sample_rate,
                            double twave_window_ms) {
  if (candidate_index <= last_qrs_index) {
    throw ConfigError("T-wave candidate must follow the last QRS");
  }
  const double gap_ms =
      static_cast<double>(candidate_index - last_qrs_index) / sample_rate * 1000.0;
  if (gap_ms < twave_window_ms && slope_candidate < 0.5 * slope_last_qrs) {
    return PeakKind::TWave;
  }
  return PeakKind::Qrs;
}

QrsResult detect_qrs(const EcgRecord& record, const DetectorConfig& config) {
  config.validate();
  if (!(record.sample_rate > 0)) throw ConfigError("sample rate must be positive");
  const double fs = record.sample_rate;
  const std::size_t n = record.samples.size();
  const std::size_t warm = static_cast<std::size_t>(std::llround(config.warmup_s * fs));
  if (n < warm || n < 5) {
    throw DataError("ECG record shorter than the " + std::to_string(config.warmup_s) +
                    " s warm-up");
  }
  const auto [lo_it, hi_it] = std::minmax_element(record.samples.begin(), record.samples.end());
  if (*lo_it == *hi_it) throw FlatLineError("flat-line ECG (zero variance)");

  const PanTompkinsStages st = preprocess(record, config);
  const std::size_t window = ms_to_samples(config.integration_window_ms, fs);
  const std::size_t refractory = ms_to_samples(config.refractory_ms, fs);
  const std::size_t margin =
      static_cast<std::size_t>(std::llround(config.refine_margin_ms * fs / 1000.0));

  // Two threshold streams: integrated signal and band-passed signal.
  DetectorState integ, filt;
  integ.refractory_samples = filt.refractory_samples = refractory;
  {
    double mx = 0, sum = 0, fmx = 0, fsum = 0;
    for (std::size_t i = 0; i < warm; ++i) {
      mx = std::max(mx, st.integrated[i]);
      sum += st.integrated[i];
      fmx = std::max(fmx, std::abs(st.bandpassed[i]));
      fsum += std::abs(st.bandpassed[i]);
    }
    integ.spk = 0.25 * mx;
    integ.npk = 0.5 * sum / static_cast<double>(warm);
    filt.spk = 0.25 * fmx;
    filt.npk = 0.5 * fsum / static_cast<double>(warm);
    recompute_thresholds(integ);
    recompute_thresholds(filt);
  }

  std::vector<Candidate> candidates;
  for (std::size_t p : integrated_peaks(st.integrated, refractory / 2)) {
    const std::size_t lo = p > window ? p - window : 0;
    candidates.push_back(
        {p, st.integrated[p], max_abs(st.bandpassed, lo, p), max_abs(st.derivative, lo, p)});
  }

  QrsResult result;
  result.refractory_samples = refractory;
  std::vector<Candidate> accepted;
  std::vector<Candidate> pending;  // noise-classified peaks since the last QRS
  RrTracker rr;

  auto accept = [&](const Candidate& c, bool searchback) {
    if (searchback) {
      integ.spk = 0.25 * c.integrated + 0.75 * integ.spk;
      filt.spk = 0.25 * c.filtered + 0.75 * filt.spk;
      recompute_thresholds(integ);
      recompute_thresholds(filt);
      ++result.searchback_count;
    } else {
      integ = update_thresholds(integ, c.integrated, true);
      filt = update_thresholds(filt, c.filtered, true);
    }
    if (!accepted.empty()) {
      rr.add(static_cast<double>(c.index - accepted.back().index));
      integ.rr_avg1 = filt.rr_avg1 = rr.avg1();
      integ.rr_avg2 = filt.rr_avg2 = rr.avg2();
    }
    accepted.push_back(c);
    integ.last_qrs_index = filt.last_qrs_index = static_cast<long>(c.index);
    std::erase_if(pending, [&](const Candidate& q) { return q.index <= c.index; });
  };

  auto search_back = [&](std::size_t upto) {
    while (!accepted.empty() && rr.avg2() > 0 &&
           static_cast<double>(upto - accepted.back().index) >
               config.searchback_factor * rr.avg2()) {
      const Candidate* best = nullptr;
      for (const Candidate& q : pending) {
        if (q.index >= upto || q.index < accepted.back().index + refractory) continue;
        if (q.integrated > integ.threshold2 && q.filtered > filt.threshold2 &&
            (!best || q.integrated > best->integrated)) {
          best = &q;
        }
      }
      if (!best) break;
      const Candidate c = *best;
      accept(c, true);
    }
  };

  for (const Candidate& c : candidates) {
    if (!accepted.empty() && c.index - accepted.back().index < refractory) continue;
    search_back(c.index);
    if (!accepted.empty() && c.index - accepted.back().index < refractory) continue;

    if (c.integrated > integ.threshold1 && c.filtered > filt.threshold1) {
      if (!accepted.empty() &&
          discriminate_twave(c.index, accepted.back().index, c.slope, accepted.back().slope, fs,
                             config.twave_window_ms) == PeakKind::TWave) {
        ++result.rejected_twave_count;
        integ = update_thresholds(integ, c.integrated, false);
        filt = update_thresholds(filt, c.filtered, false);
        continue;
      }
      accept(c, false);
    } else {
      integ = update_thresholds(integ, c.integrated, false);
      filt = update_thresholds(filt, c.filtered, false);
      pending.push_back(c);
    }
  }
  search_back(n);

  // Move each detection onto the raw R-wave maximum inside the integration
  // window, widened by the refinement margin on both sides.
  for (const Candidate& c : accepted) {
    const std::size_t lo = c.index > window + margin ? c.index - window - margin : 0;
    const std::size_t hi = std::min(n - 1, c.index + margin);
    std::size_t best = lo;
    for (std::size_t i = lo; i <= hi; ++i) {
      if (record.samples[i] > record.samples[best]) best = i;
    }
    if (!result.r_indices.empty()) {
      const std::size_t prev = result.r_indices.back();
      if (best <= prev || best - prev < refractory) continue;
    }
    result.r_indices.push_back(best);
  }
  return result;
}

}  // namespace hrvpain
