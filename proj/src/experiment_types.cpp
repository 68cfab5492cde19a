// SPDX-License-Identifier: Apache-2.0
#include "hrvpain/experiment_types.hpp"

#include <string>

#include "hrvpain/error.hpp"

namespace hrvpain {

std::string_view to_string(SchemeName s) {
  switch (s) {
    case SchemeName::Basic: return "Basic";
    case SchemeName::Gender: return "Gender";
    case SchemeName::Age: return "Age";
    case SchemeName::GenderAge: return "GenderAge";
  }
  return "?";
}

SchemeName parse_scheme(std::string_view s) {
  for (auto v : {SchemeName::Basic, SchemeName::Gender, SchemeName::Age, SchemeName::GenderAge}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("unknown scheme '" + std::string(s) + "'");
}

std::string_view to_string(TaskKind t) {
  switch (t) {
    case TaskKind::NPvsP1: return "NPvsP1";
    case TaskKind::NPvsP2: return "NPvsP2";
    case TaskKind::NPvsP3: return "NPvsP3";
    case TaskKind::NPvsP4: return "NPvsP4";
    case TaskKind::MultiClass: return "MC";
  }
  return "?";
}

std::string_view task_title(TaskKind t) {
  switch (t) {
    case TaskKind::NPvsP1: return "NP vs P1";
    case TaskKind::NPvsP2: return "NP vs P2";
    case TaskKind::NPvsP3: return "NP vs P3";
    case TaskKind::NPvsP4: return "NP vs P4";
    case TaskKind::MultiClass: return "MC";
  }
  return "?";
}

TaskKind parse_task(std::string_view s) {
  for (auto t : kAllTasks) {
    if (s == to_string(t) || s == task_title(t)) return t;
  }
  if (s == "MultiClass") return TaskKind::MultiClass;
  throw ConfigError("unknown task '" + std::string(s) + "'");
}

bool TaskSpec::keeps(PainLabel label) const {
  switch (kind) {
    case TaskKind::MultiClass: return true;
    case TaskKind::NPvsP1: return label == PainLabel::NP || label == PainLabel::P1;
    case TaskKind::NPvsP2: return label == PainLabel::NP || label == PainLabel::P2;
    case TaskKind::NPvsP3: return label == PainLabel::NP || label == PainLabel::P3;
    case TaskKind::NPvsP4: return label == PainLabel::NP || label == PainLabel::P4;
  }
  return false;
}

int TaskSpec::class_of(PainLabel label) const {
  if (!keeps(label)) throw DataError("label not part of task " + std::string(to_string(kind)));
  if (kind == TaskKind::MultiClass) return static_cast<int>(label);
  return label == PainLabel::NP ? 0 : 1;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::StNn: return "ST-NN";
    case Method::StNnFG: return "ST-NN+F(G)";
    case Method::StNnFA: return "ST-NN+F(A)";
    case Method::StNnFGA: return "ST-NN+F(GA)";
    case Method::MtNnTG: return "MT-NN+T(G)";
    case Method::MtNnTA: return "MT-NN+T(A)";
    case Method::MtNnTGA: return "MT-NN+T(GA)";
    case Method::Majority: return "Majority";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (auto m : {Method::StNn, Method::StNnFG, Method::StNnFA, Method::StNnFGA, Method::MtNnTG,
                 Method::MtNnTA, Method::MtNnTGA, Method::Majority}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

std::string_view method_algorithm(Method m) {
  if (m == Method::Majority) return "Majority";
  return method_is_multi_task(m) ? "MT-NN" : "ST-NN";
}

std::string_view method_aux(Method m) {
  switch (m) {
    case Method::StNnFG: return "F(G)";
    case Method::StNnFA: return "F(A)";
    case Method::StNnFGA: return "F(GA)";
    case Method::MtNnTG: return "T(G)";
    case Method::MtNnTA: return "T(A)";
    case Method::MtNnTGA: return "T(GA)";
    default: return "-";
  }
}

AugmentMode method_augmentation(Method m) {
  switch (m) {
    case Method::StNnFG: return AugmentMode::G;
    case Method::StNnFA: return AugmentMode::A;
    case Method::StNnFGA: return AugmentMode::GA;
    default: return AugmentMode::None;
  }
}

bool method_is_multi_task(Method m) {
  return m == Method::MtNnTG || m == Method::MtNnTA || m == Method::MtNnTGA;
}

TaskSet method_tasks(Method m) {
  TaskSet t;
  t.gender = m == Method::MtNnTG || m == Method::MtNnTGA;
  t.age = m == Method::MtNnTA || m == Method::MtNnTGA;
  return t;
}

}  // namespace hrvpain
