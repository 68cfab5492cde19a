// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "hrvpain/hrv.hpp"
#include "hrvpain/models.hpp"
#include "hrvpain/signal.hpp"

namespace hrvpain {

enum class SchemeName { Basic, Gender, Age, GenderAge };

std::string_view to_string(SchemeName s);
SchemeName parse_scheme(std::string_view s);

enum class TaskKind { NPvsP1, NPvsP2, NPvsP3, NPvsP4, MultiClass };

inline constexpr std::array<TaskKind, 5> kAllTasks{TaskKind::NPvsP1, TaskKind::NPvsP2,
                                                   TaskKind::NPvsP3, TaskKind::NPvsP4,
                                                   TaskKind::MultiClass};

/// Machine names ("NPvsP1", ..., "MC").
std::string_view to_string(TaskKind t);
/// Column titles as they appear in result tables ("NP vs P1", ..., "MC").
std::string_view task_title(TaskKind t);
TaskKind parse_task(std::string_view s);

/// Label filter and class mapping of one classification task.
struct TaskSpec {
  TaskKind kind = TaskKind::MultiClass;

  static TaskSpec of(TaskKind k) { return TaskSpec{k}; }
  std::size_t class_count() const { return kind == TaskKind::MultiClass ? 5 : 2; }
  bool keeps(PainLabel label) const;
  /// Class index of a kept label: NP -> 0, the paired intensity -> 1; MC uses
  /// the label order.
  int class_of(PainLabel label) const;
};

enum class Method { StNn, StNnFG, StNnFA, StNnFGA, MtNnTG, MtNnTA, MtNnTGA, Majority };

/// "ST-NN", "ST-NN+F(G)", ..., "MT-NN+T(GA)", "Majority".
std::string_view to_string(Method m);
Method parse_method(std::string_view s);
/// "ST-NN" / "MT-NN" / "Majority".
std::string_view method_algorithm(Method m);
/// "-", "F(G)", ..., "T(GA)".
std::string_view method_aux(Method m);

AugmentMode method_augmentation(Method m);
bool method_is_multi_task(Method m);
TaskSet method_tasks(Method m);

}  // namespace hrvpain
