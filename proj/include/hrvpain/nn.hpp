// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hrvpain::nn {

/// Activations are stored one sample per column.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Flat parameter storage; aligned so vectorised kernels see the same layout
/// for every buffer.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// A fully connected layer whose weights live in a shared flat parameter
/// buffer: W (n_out x n_in, column-major) at `offset`, then b (n_out).
struct DenseLayer {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::size_t offset = 0;
  bool relu = false;

  std::size_t weight_count() const { return n_in * n_out; }
  std::size_t param_count() const { return n_in * n_out + n_out; }
  std::size_t bias_offset() const { return offset + weight_count(); }

  Eigen::Map<const Matrix> weights(std::span<const double> params) const;
  Eigen::Map<const Vector> bias(std::span<const double> params) const;
  Eigen::Map<Matrix> weights(std::span<double> params) const;
  Eigen::Map<Vector> bias(std::span<double> params) const;
};

/// z = b + W s for one input vector.
Vector dense_forward(const DenseLayer& layer, std::span<const double> params,
                     const Vector& input);

/// Elementwise max(0, z); z == 0 maps to 0.
Matrix relu(const Matrix& z);

/// Per-layer activations retained for the backward pass.
struct StackCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
};

/// A chain of dense layers sharing one parameter buffer.
class DenseStack {
 public:
  void add(std::size_t n_in, std::size_t n_out, bool relu, std::size_t offset);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t input_dim() const { return layers_.front().n_in; }
  std::size_t output_dim() const { return layers_.back().n_out; }
  std::size_t param_count() const;

  Matrix forward(std::span<const double> params, const Matrix& x, StackCache* cache = nullptr) const;

  /// Writes this stack's parameter gradients into `grads` and returns dL/dx.
  Matrix backward(std::span<const double> params, const StackCache& cache, Matrix d_out,
                  std::span<double> grads) const;

  /// Fingerprint of every ReLU on/off state in `cache`.
  static std::uint64_t activation_signature(const StackCache& cache, std::uint64_t seed = 0);

 private:
  std::vector<DenseLayer> layers_;
};

/// He-style uniform fan-in initialisation; biases start at zero.
void he_uniform_init(const DenseLayer& layer, std::span<double> params, std::uint64_t& rng_state);

/// Stable log-softmax of one logit vector.
std::vector<double> log_softmax(std::span<const double> logits);

/// Target distribution with 1 - eps on the true class and eps/(n-1) elsewhere.
std::vector<double> smoothed_targets(std::size_t n_out, std::size_t true_class, double epsilon);

/// -sum_i p_i log softmax(logits)_i with label-smoothed targets.
double smoothed_cross_entropy(std::span<const double> logits, std::size_t true_class,
                              double epsilon);

/// -log softmax(logits)[true_class].
double cross_entropy(std::span<const double> logits, std::size_t true_class);

/// Batch-mean smoothed cross-entropy over the columns of `logits`. When
/// `grad` is non-null it receives dLoss/dlogits scaled by `grad_scale`.
double smoothed_cross_entropy_batch(const Matrix& logits, std::span<const int> classes,
                                    double epsilon, Matrix* grad = nullptr,
                                    double grad_scale = 1.0);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.1;
};

/// AdamW with decoupled weight decay and bias correction. Entries with a
/// zero in `decay_mask` skip decay; zeros in `train_mask` are frozen.
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::size_t n, AdamWConfig config, std::vector<unsigned char> decay_mask = {},
        std::vector<unsigned char> train_mask = {});

  void step(std::span<double> params, std::span<const double> grads, double lr);

  const AdamWConfig& config() const { return config_; }
  std::uint64_t step_count() const { return step_; }
  const ParamVector& first_moment() const { return m_; }
  const ParamVector& second_moment() const { return v_; }
  void restore(std::uint64_t step, ParamVector m, ParamVector v);

 private:
  AdamWConfig config_;
  ParamVector m_, v_;
  std::vector<unsigned char> decay_mask_, train_mask_;
  std::uint64_t step_ = 0;
};

/// Linear warm-up from 0 followed by cosine decay to 0, epoch-granular.
struct LrSchedule {
  double base_lr = 1e-3;
  int warmup_epochs = 50;
  int total_epochs = 300;

  void validate() const;
  double lr_at(int epoch) const;
};

class Ema {
 public:
  Ema() = default;
  Ema(std::span<const double> params, double decay);

  /// shadow <- decay * shadow + (1 - decay) * params
  void update(std::span<const double> params);

  double decay() const { return decay_; }
  const ParamVector& shadow() const { return shadow_; }
  ParamVector& shadow() { return shadow_; }

 private:
  ParamVector shadow_;
  double decay_ = 0.999;
};

/// Swaps EMA shadow weights into a live parameter vector for the lifetime of
/// the guard, then swaps them back.
class EmaSwap {
 public:
  EmaSwap(Ema& ema, ParamVector& live);
  ~EmaSwap();
  EmaSwap(const EmaSwap&) = delete;
  EmaSwap& operator=(const EmaSwap&) = delete;

 private:
  Ema& ema_;
  ParamVector& live_;
};

/// Binary checkpoint: magic, format version, a JSON header (model config,
/// config hash, optimiser step) and raw float64 sections.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string header_json;  // model configuration and metadata
  std::string config_hash;
  std::uint64_t optimizer_step = 0;
  ParamVector params;
  ParamVector ema_shadow;
  ParamVector adam_m;
  ParamVector adam_v;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace hrvpain::nn
