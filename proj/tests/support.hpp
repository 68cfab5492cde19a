// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstring>
#include <random>
#include <vector>

#include "hrvpain/models.hpp"

namespace support {

inline hrvpain::Batch random_batch(std::size_t input_dim, std::size_t pain_classes, std::size_t age_classes,
                                   std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  hrvpain::Batch b;
  b.x.resize(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < b.x.size(); ++i) b.x(i) = nd(rng);
  for (std::size_t i = 0; i < n; ++i) {
    b.pain.push_back(static_cast<int>(rng() % pain_classes));
    b.age.push_back(static_cast<int>(rng() % age_classes));
    b.gender.push_back(static_cast<int>(rng() % 2));
  }
  return b;
}

inline bool bits_equal(const double* a, const double* b, std::size_t n) {
  return std::memcmp(a, b, n * sizeof(double)) == 0;
}

struct BitMatch {
  bool loss_equal = true;
  bool params_equal = true;
  int steps = 0;
};

// Trains an ST network and an MT T(GA) network with zero auxiliary weights
// side by side and compares pain loss and shared parameters after each step.
inline BitMatch st_mt_bit_match(const hrvpain::NetworkConfig& st_cfg, int steps, std::uint64_t seed) {
  using namespace hrvpain;
  NetworkConfig mt_cfg = mt_nn_config(st_cfg.input_dim, st_cfg.pain_classes, {true, true, true});
  mt_cfg.encoder_widths = st_cfg.encoder_widths;
  mt_cfg.head_width = st_cfg.head_width;
  mt_cfg.age_classes = 8;
  TrainConfig tc;
  tc.coefficients = {1.0, 0.0, 0.0};
  tc.learn_task_weights = false;
  tc.ema = true;
  tc.ema_decay = 0.9;
  TrainingSession st(build_st_nn(st_cfg, seed), tc, seed);
  TrainingSession mt(build_mt_nn(mt_cfg, seed), tc, seed);
  const std::size_t shared = st.network().param_count();
  BitMatch out;
  for (int k = 0; k < steps; ++k) {
    const Batch b = random_batch(st_cfg.input_dim, st_cfg.pain_classes, 8, 32, seed * 1000 + static_cast<std::uint64_t>(k));
    const auto ls = st.step(b, 1e-3);
    const auto lm = mt.step(b, 1e-3);
    out.loss_equal = out.loss_equal && std::memcmp(&ls.pain, &lm.pain, sizeof(double)) == 0 &&
                     std::memcmp(&ls.total, &lm.total, sizeof(double)) == 0;
    out.params_equal = out.params_equal &&
                       bits_equal(st.network().params().data(), mt.network().params().data(), shared) &&
                       bits_equal(st.ema()->shadow().data(), mt.ema()->shadow().data(), shared);
    ++out.steps;
  }
  return out;
}

}  // namespace support
