// SPDX-License-Identifier: Apache-2.0
// Test-side reference implementations, written independently of the library.
#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace oracle {

struct Hrv {
  long double mean, sdnn, rmssd, slope, ratio, hr;
};

// Raw-moment formulas in extended precision.
inline Hrv hrv(const std::vector<double>& ibi) {
  const long double n = static_cast<long double>(ibi.size());
  long double s1 = 0, s2 = 0, sx = 0, sxx = 0, sxy = 0, sq = 0;
  for (std::size_t k = 0; k < ibi.size(); ++k) {
    const long double v = ibi[k];
    const long double t = static_cast<long double>(k);
    s1 += v;
    s2 += v * v;
    sx += t;
    sxx += t * t;
    sxy += t * v;
    if (k > 0) {
      const long double d = v - static_cast<long double>(ibi[k - 1]);
      sq += d * d;
    }
  }
  Hrv h{};
  h.mean = s1 / n;
  long double var = s2 / n - h.mean * h.mean;
  if (var < 0) var = 0;
  h.sdnn = std::sqrt(var);
  h.rmssd = std::sqrt(sq / (n - 1));
  h.slope = (n * sxy - sx * s1) / (n * sxx - sx * sx);
  h.ratio = h.rmssd == 0 ? 0 : h.sdnn / h.rmssd;
  h.hr = 60000.0L / h.mean;
  return h;
}

inline double rel_err(double got, long double want) {
  const long double d = std::fabs(static_cast<long double>(got) - want);
  const long double s = std::fabs(want);
  return static_cast<double>(s > 1e-300L ? d / s : d);
}

// -sum p log softmax(z) with targets built from scratch.
inline long double smoothed_ce(const std::vector<double>& z, std::size_t y, double eps) {
  long double mx = z[0];
  for (double v : z) mx = std::max<long double>(mx, v);
  long double se = 0;
  for (double v : z) se += std::exp(static_cast<long double>(v) - mx);
  const long double lse = mx + std::log(se);
  long double loss = 0;
  const long double off = static_cast<long double>(eps) / static_cast<long double>(z.size() - 1);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const long double p = i == y ? 1.0L - eps : off;
    loss -= p * (static_cast<long double>(z[i]) - lse);
  }
  return loss;
}

}  // namespace oracle
