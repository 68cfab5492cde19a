// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrvpain/config.hpp"
#include "hrvpain/dataset.hpp"
#include "hrvpain/experiment_types.hpp"

namespace hrvpain {

struct SubjectGroup {
  std::string name;
  std::vector<std::string> subjects;
};

struct Scheme {
  SchemeName name = SchemeName::Basic;
  std::vector<SubjectGroup> groups;
};

/// Partitions the dataset's subjects. Age bins are the closed ranges
/// [20,35], [36,50], [51,65]; GenderAge always yields six groups.
Scheme make_scheme(const Dataset& dataset, SchemeName name);

struct FoldResult {
  std::string held_out;
  std::uint64_t seed = 0;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  std::size_t correct = 0;
  double accuracy = 0;  // percent
  bool skipped = false;
  std::string skip_reason;
  /// Subjects whose rows fed the normalisation statistics and the gradients.
  std::vector<std::string> normalization_subjects;
  std::vector<std::string> gradient_subjects;
};

struct FoldReport {
  std::string group;
  TaskKind task = TaskKind::MultiClass;
  Method method = Method::StNn;
  std::vector<FoldResult> folds;
  std::size_t total_windows = 0;
  std::size_t total_correct = 0;
  /// Pooled over every held-out window, in percent.
  double pooled_accuracy = 0;
  std::size_t skipped_folds = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::json model_config;

  nlohmann::json to_json() const;
};

/// Per-fold seed derived from the run seed and the fold index.
std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold_index);

/// Leave-one-subject-out over `group`. Raises ConfigError for groups with
/// fewer than two subjects; folds whose training labels are single-class
/// are skipped and flagged.
FoldReport run_loso(const Dataset& dataset, const SubjectGroup& group, TaskKind task, Method method,
                    const ExperimentConfig& config, std::uint64_t seed);

/// A network fitted on every window of a dataset for one task and method.
struct TrainedModel {
  TrainingSession session;
  Normalizer normalizer;
  std::size_t windows = 0;
  /// Pain accuracy on the training windows, in percent.
  double train_accuracy = 0;
};

TrainedModel train_on_dataset(const Dataset& dataset, TaskKind task, Method method,
                              const ExperimentConfig& config);

struct MatrixCell {
  SchemeName scheme;
  std::string group;
  TaskKind task;
  Method method;
  std::optional<FoldReport> report;
  std::string error;
};

struct MatrixResult {
  std::vector<MatrixCell> cells;
  std::string config_hash;
};

using ProgressFn = std::function<void(const MatrixCell&)>;

/// Runs schemes x groups x methods x tasks. Cell failures are recorded and
/// the matrix continues.
MatrixResult run_matrix(const Dataset& dataset, const ExperimentConfig& config,
                        const ProgressFn& progress = {});

/// Mean-over-tasks accuracy of one method.
struct MethodRow {
  std::string method;
  std::map<std::string, double> accuracy;  // task -> percent
};

struct MethodDelta {
  std::string a;
  std::string b;
  double delta;  // mean(a) - mean(b)
};

struct MethodComparison {
  std::vector<std::pair<std::string, double>> means;
  std::vector<MethodDelta> deltas;

  double delta(const std::string& a, const std::string& b) const;
};

/// Requires identical task coverage across rows.
MethodComparison compare_methods(const std::vector<MethodRow>& rows);

}  // namespace hrvpain
