// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrvpain/nn.hpp"

namespace hrvpain {

enum class LossForm { PaperLiteral, KendallCorrected };

std::string_view to_string(LossForm f);
LossForm parse_loss_form(std::string_view s);

struct TaskSet {
  bool pain = true;
  bool age = false;
  bool gender = false;
};

/// Shared encoder plus a pain classifier and optional age/gender heads.
/// Every head is hidden (no activation) followed by its output layer.
struct NetworkConfig {
  std::size_t input_dim = 6;
  std::vector<std::size_t> encoder_widths{256, 512, 1024, 1024};
  std::size_t head_width = 1024;
  std::size_t pain_classes = 2;
  std::size_t age_classes = 36;
  std::size_t gender_classes = 2;
  TaskSet tasks;
  /// Multi-task networks carry the learned task weights w1..w3.
  bool multi_task = false;

  void validate() const;
  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& j);
};

/// Single-task network: encoder and pain classifier only.
NetworkConfig st_nn_config(std::size_t input_dim, std::size_t pain_classes);
/// Multi-task network with the given auxiliary heads; pain is always present.
NetworkConfig mt_nn_config(std::size_t input_dim, std::size_t pain_classes, TaskSet tasks);

struct NetworkOutput {
  nn::Matrix pain;
  std::optional<nn::Matrix> age;
  std::optional<nn::Matrix> gender;
};

struct ForwardCache {
  nn::StackCache encoder;
  nn::Matrix features;
  nn::StackCache pain, age, gender;
};

class PainNetwork {
 public:
  /// Parameters are laid out encoder, pain head, age head, gender head, then
  /// w1..w3; initialisation draws in the same order.
  static PainNetwork build(const NetworkConfig& config, std::uint64_t seed);

  const NetworkConfig& config() const { return config_; }
  nn::ParamVector& params() { return params_; }
  const nn::ParamVector& params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  const nn::DenseStack& encoder() const { return encoder_; }
  const nn::DenseStack& pain_head() const { return pain_; }
  const std::optional<nn::DenseStack>& age_head() const { return age_; }
  const std::optional<nn::DenseStack>& gender_head() const { return gender_; }

  /// Offset of w1 (w2, w3 follow), present only for multi-task networks.
  std::optional<std::size_t> task_weight_offset() const { return task_weight_offset_; }
  std::array<double, 3> task_weights() const;
  /// Every dense layer in parameter order.
  std::vector<nn::DenseLayer> all_layers() const;

  NetworkOutput forward(const nn::Matrix& x, ForwardCache* cache = nullptr) const;
  NetworkOutput forward_with(std::span<const double> params, const nn::Matrix& x,
                             ForwardCache* cache = nullptr) const;

 private:
  NetworkConfig config_;
  nn::ParamVector params_;
  nn::DenseStack encoder_, pain_;
  std::optional<nn::DenseStack> age_, gender_;
  std::optional<std::size_t> task_weight_offset_;
};

PainNetwork build_st_nn(const NetworkConfig& config, std::uint64_t seed);
PainNetwork build_mt_nn(const NetworkConfig& config, std::uint64_t seed);

struct MtlLossParams {
  std::array<double, 3> w{0, 0, 0};
  std::array<double, 3> c{1.0, 0.2, 0.2};
};

struct MtlLossResult {
  double total = 0;
  std::array<double, 3> contributions{0, 0, 0};
  /// dTotal/dL_k and dTotal/dw_k.
  std::array<double, 3> d_loss{0, 0, 0};
  std::array<double, 3> d_weight{0, 0, 0};
};

/// Combines pain, age, and gender losses. Absent tasks (nullopt) contribute
/// nothing. PaperLiteral: [e^w L + w] c; KendallCorrected: [e^-w L + w] c.
MtlLossResult mtl_loss(double l_pain, std::optional<double> l_age, std::optional<double> l_gender,
                       const MtlLossParams& params, LossForm form);

struct LossSpec {
  double label_smoothing = 0.1;
  std::array<double, 3> coefficients{1.0, 0.2, 0.2};
  LossForm form = LossForm::KendallCorrected;
};

/// Column-per-sample inputs with per-task integer labels.
struct Batch {
  nn::Matrix x;
  std::vector<int> pain;
  std::vector<int> age;
  std::vector<int> gender;
};

struct LossBreakdown {
  double total = 0;
  double pain = 0;
  std::optional<double> age;
  std::optional<double> gender;
};

/// Forward pass plus loss. Single-task networks return the pain loss; multi-
/// task networks combine heads through mtl_loss with w1..w3 read from the
/// parameters. When `grads` is non-empty it receives dTotal/dparams.
/// `signature`, when given, receives the ReLU activation fingerprint.
LossBreakdown forward_loss(const PainNetwork& net, std::span<const double> params,
                           const Batch& batch, const LossSpec& spec, std::span<double> grads = {},
                           std::uint64_t* signature = nullptr);

struct GradCheckOptions {
  std::size_t sample_count = 120;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error.
  double denominator_floor = 1e-7;
  /// Test hook: scales the analytic gradient before comparison.
  double corrupt_factor = 1.0;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::size_t index;
  double analytic;
  double numeric;
  double rel_error;
};

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t kinks_skipped = 0;
  double max_rel_error = 0;
  bool passed = false;
  bool numerical_failure = false;
  std::string failure;
  std::vector<GradCheckEntry> entries;
};

/// Central-difference check over a stratified sample of parameters (every
/// layer's weights and biases, and w1..w3 when present). Samples whose
/// +-step evaluations change any ReLU state are skipped as kinks.
GradCheckReport gradient_check(const PainNetwork& net, const Batch& batch, const LossSpec& spec,
                               const GradCheckOptions& options = {});

struct TrainConfig {
  int epochs = 300;
  int warmup_epochs = 50;
  double learning_rate = 1e-3;
  double weight_decay = 0.1;
  double label_smoothing = 0.1;
  bool ema = true;
  double ema_decay = 0.999;
  std::size_t batch_size = 128;
  std::array<double, 3> coefficients{1.0, 0.2, 0.2};
  LossForm loss_form = LossForm::KendallCorrected;
  bool learn_task_weights = true;
  bool eval_with_ema = true;

  void validate() const;
  LossSpec loss_spec() const;
  nn::LrSchedule schedule() const;
};

/// Training set, one column per sample; `subject` indexes a caller-side
/// subject table so batches can be audited.
struct TrainingData {
  nn::Matrix x;
  std::vector<int> pain;
  std::vector<int> age;
  std::vector<int> gender;
  std::vector<int> subject;

  std::size_t size() const { return static_cast<std::size_t>(x.cols()); }
  Batch gather(std::span<const std::size_t> columns) const;
};

/// One network plus its optimiser and EMA state.
class TrainingSession {
 public:
  TrainingSession(PainNetwork net, const TrainConfig& config, std::uint64_t seed);

  /// Forward, backward, AdamW step at `lr`, then EMA update. Returns the loss.
  LossBreakdown step(const Batch& batch, double lr);
  /// One shuffled pass over `data` at the scheduled rate for `epoch`.
  double run_epoch(const TrainingData& data, int epoch);
  void fit(const TrainingData& data);

  /// Pain-class argmax, using EMA weights when configured.
  std::vector<int> predict(const nn::Matrix& x);

  PainNetwork& network() { return net_; }
  const PainNetwork& network() const { return net_; }
  const nn::AdamW& optimizer() const { return opt_; }
  const std::optional<nn::Ema>& ema() const { return ema_; }
  /// Subject indices of every column that contributed to a gradient.
  const std::set<int>& gradient_subjects() const { return gradient_subjects_; }

  nn::Checkpoint checkpoint(const std::string& config_hash) const;
  static TrainingSession restore(const nn::Checkpoint& ck, const TrainConfig& config,
                                 std::uint64_t seed);

 private:
  PainNetwork net_;
  TrainConfig config_;
  LossSpec loss_;
  nn::AdamW opt_;
  std::optional<nn::Ema> ema_;
  nn::ParamVector grads_;
  std::uint64_t shuffle_state_;
  std::set<int> gradient_subjects_;
};

}  // namespace hrvpain
