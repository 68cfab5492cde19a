// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hrvpain/experiment_types.hpp"
#include "hrvpain/models.hpp"
#include "hrvpain/qrs.hpp"

namespace hrvpain {

/// Network shape and optimiser settings. Defaults follow the published
/// training table: 300 epochs, AdamW at 1e-3, cosine decay after 50 warm-up
/// epochs, weight decay 0.1, label smoothing 0.1, EMA on.
struct NnSettings {
  int epochs = 300;
  int warmup_epochs = 50;
  double learning_rate = 1e-3;
  double weight_decay = 0.1;
  double label_smoothing = 0.1;
  bool ema = true;
  double ema_decay = 0.999;
  bool eval_with_ema = true;
  std::size_t batch_size = 128;
  std::vector<std::size_t> encoder_widths{256, 512, 1024, 1024};
  std::size_t head_width = 1024;
  std::size_t age_head_width = 36;
};

struct MtlSettings {
  double c1 = 1.0;
  double c2 = 0.2;
  double c3 = 0.2;
  LossForm loss_form = LossForm::KendallCorrected;
  bool learn_task_weights = true;
};

struct ExperimentConfig {
  std::vector<SchemeName> schemes{SchemeName::Basic};
  std::vector<TaskKind> tasks{kAllTasks.begin(), kAllTasks.end()};
  std::vector<Method> methods{Method::StNn};
  MtlSettings mtl;
  DetectorConfig detector;
  FeatureOptions features;
  NnSettings nn;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;

  nlohmann::json to_json() const;
  /// Rejects unknown keys.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Applies "dotted.key=value"; the value is parsed as JSON when possible,
  /// otherwise taken as a string.
  void apply_override(std::string_view assignment);
  /// Applies every assignment in order, validating only the final result.
  void apply_overrides(const std::vector<std::string>& assignments);

  /// Hash of every setting that influences training results. Run selection
  /// (schemes, tasks, methods) and the worker count are excluded.
  std::string training_hash() const;

  TrainConfig train_config() const;
  NetworkConfig network_config(Method method, std::size_t pain_classes) const;
};

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace hrvpain
