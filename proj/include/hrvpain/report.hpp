// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hrvpain/experiments.hpp"

namespace hrvpain {

/// One line of matrix.csv.
struct MatrixRow {
  std::string scheme;
  std::string group;
  std::string method;
  std::string task;
  std::optional<double> accuracy;
  std::size_t windows = 0;
  std::size_t folds = 0;
  std::size_t skipped_folds = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string status;  // "ok" or the error text
};

std::vector<MatrixRow> matrix_rows(const MatrixResult& result);

std::string render_matrix_csv(const std::vector<MatrixRow>& rows);
std::vector<MatrixRow> parse_matrix_csv(const std::filesystem::path& path);

/// Aligned text tables, one per scheme: Group | Algorithm | Aux. | one
/// column per task.
std::string render_tables(const std::vector<MatrixRow>& rows);

/// Mean-over-tasks comparison for every (scheme, group) with complete rows.
std::string render_comparisons(const std::vector<MatrixRow>& rows);

/// Writes matrix.csv, matrix.txt, effective_config.json and
/// folds/<group>/<task>/<method>.json under `run_dir`.
void write_run(const MatrixResult& result, const ExperimentConfig& config,
               const std::filesystem::path& run_dir);

/// Filesystem-safe form of a group or method name.
std::string path_component(std::string_view name);

}  // namespace hrvpain
