// SPDX-License-Identifier: Apache-2.0
#include "hrvpain/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <set>
#include <stdexcept>
#include <thread>

#include "hrvpain/error.hpp"

namespace hrvpain {

using nlohmann::json;

Scheme make_scheme(const Dataset& dataset, SchemeName name) {
  const auto subjects = dataset.subjects();
  if (subjects.empty()) throw DataError("dataset has no subjects");
  for (const auto& s : subjects) {
    if (s.age < kMinAge || s.age > kMaxAge) {
      throw DataError("subject " + s.id + " age " + std::to_string(s.age) + " outside [20, 65]");
    }
  }
  auto age_bin = [](int age) { return age <= 35 ? 0 : (age <= 50 ? 1 : 2); };
  static constexpr const char* kBinNames[] = {"20-35", "36-50", "51-65"};

  Scheme scheme;
  scheme.name = name;
  switch (name) {
    case SchemeName::Basic: {
      SubjectGroup all{"All", {}};
      for (const auto& s : subjects) all.subjects.push_back(s.id);
      scheme.groups.push_back(std::move(all));
      break;
    }
    case SchemeName::Gender: {
      scheme.groups = {{"Males", {}}, {"Females", {}}};
      for (const auto& s : subjects) scheme.groups[s.gender == Gender::Male ? 0 : 1].subjects.push_back(s.id);
      break;
    }
    case SchemeName::Age: {
      for (const char* b : kBinNames) scheme.groups.push_back({b, {}});
      for (const auto& s : subjects) scheme.groups[static_cast<std::size_t>(age_bin(s.age))].subjects.push_back(s.id);
      break;
    }
    case SchemeName::GenderAge: {
      for (const char* b : kBinNames) {
        scheme.groups.push_back({std::string("Males ") + b, {}});
        scheme.groups.push_back({std::string("Females ") + b, {}});
      }
      for (const auto& s : subjects) {
        const std::size_t g = static_cast<std::size_t>(age_bin(s.age)) * 2 + (s.gender == Gender::Male ? 0 : 1);
        scheme.groups[g].subjects.push_back(s.id);
      }
      break;
    }
  }
  return scheme;
}

json FoldReport::to_json() const {
  json j;
  j["group"] = group;
  j["task"] = to_string(task);
  j["method"] = to_string(method);
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["model_config"] = model_config;
  j["total_windows"] = total_windows;
  j["total_correct"] = total_correct;
  j["pooled_accuracy"] = pooled_accuracy;
  j["skipped_folds"] = skipped_folds;
  j["aggregation"] = "pooled-over-windows";
  j["folds"] = json::array();
  for (const auto& f : folds) {
    j["folds"].push_back({{"held_out", f.held_out},
                          {"seed", f.seed},
                          {"train_windows", f.train_windows},
                          {"test_windows", f.test_windows},
                          {"correct", f.correct},
                          {"accuracy", f.accuracy},
                          {"skipped", f.skipped},
                          {"skip_reason", f.skip_reason},
                          {"audit",
                           {{"normalization_subjects", f.normalization_subjects},
                            {"gradient_subjects", f.gradient_subjects}}}});
  }
  return j;
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold_index) {
  std::uint64_t x = static_cast<std::uint64_t>(fold_index) + 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return seed ^ (x ^ (x >> 31));
}

namespace {

struct TaskRow {
  std::size_t subject;  // index into the group's subject list
  std::vector<double> x;
  int label;
  int gender;
  int age;
};

nn::Matrix to_matrix(const std::vector<const TaskRow*>& rows, const Normalizer& norm) {
  const auto d = static_cast<Eigen::Index>(norm.mean.size());
  nn::Matrix x(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto z = norm.apply(std::span<const double>(rows[i]->x));
    for (Eigen::Index k = 0; k < d; ++k) x(k, static_cast<Eigen::Index>(i)) = z[static_cast<std::size_t>(k)];
  }
  return x;
}

struct FittedNetwork {
  TrainingSession session;
};

FittedNetwork fit_network(const std::vector<const TaskRow*>& train, const Normalizer& norm, Method method,
                          std::size_t classes, const ExperimentConfig& config, std::uint64_t seed) {
  // Age targets: distinct training ages in ascending order.
  std::vector<int> ages;
  for (const auto* r : train) ages.push_back(r->age);
  std::sort(ages.begin(), ages.end());
  ages.erase(std::unique(ages.begin(), ages.end()), ages.end());
  const NetworkConfig net_cfg = config.network_config(method, classes);
  if (net_cfg.tasks.age && ages.size() > net_cfg.age_classes) {
    throw ConfigError("training set has " + std::to_string(ages.size()) + " distinct ages but the age head has " +
                      std::to_string(net_cfg.age_classes) + " outputs");
  }

  TrainingData data;
  data.x = to_matrix(train, norm);
  for (const auto* r : train) {
    data.pain.push_back(r->label);
    data.gender.push_back(r->gender);
    data.age.push_back(static_cast<int>(std::lower_bound(ages.begin(), ages.end(), r->age) - ages.begin()));
    data.subject.push_back(static_cast<int>(r->subject));
  }
  TrainingSession session(PainNetwork::build(net_cfg, seed), config.train_config(), seed ^ 0x7f4a7c15ULL);
  session.fit(data);
  return {std::move(session)};
}

std::vector<TaskRow> task_rows(const Dataset& dataset, const std::map<std::string, std::size_t>& subject_index,
                               const TaskSpec& spec, Method method) {
  std::vector<TaskRow> rows;
  const AugmentMode aug = method_augmentation(method);
  for (const auto& r : dataset.records) {
    const auto it = subject_index.find(r.subject_id);
    if (it == subject_index.end() || !spec.keeps(r.label)) continue;
    if (!r.features) throw DataError("dataset lacks HRV features; run extract-features first");
    const FeatureVector fv = augment_features(*r.features, aug, r.gender, r.age);
    rows.push_back({it->second, fv.values(), spec.class_of(r.label), r.gender == Gender::Female ? 1 : 0, r.age});
  }
  return rows;
}

FoldResult run_fold(const std::vector<TaskRow>& rows, const std::vector<std::string>& subjects,
                    std::size_t held_out, TaskKind task, Method method,
                    const ExperimentConfig& config, std::uint64_t seed) {
  FoldResult fr;
  fr.held_out = subjects[held_out];
  fr.seed = seed;

  std::vector<const TaskRow*> train, test;
  for (const auto& r : rows) (r.subject == held_out ? test : train).push_back(&r);
  fr.train_windows = train.size();
  fr.test_windows = test.size();
  if (test.empty()) {
    fr.skipped = true;
    fr.skip_reason = "no held-out windows";
    return fr;
  }
  std::set<int> train_labels;
  for (const auto* r : train) train_labels.insert(r->label);
  if (train_labels.size() < 2) {
    fr.skipped = true;
    fr.skip_reason = "single-class training fold";
    return fr;
  }

  FeatureRows train_x;
  std::set<std::size_t> norm_subjects;
  for (const auto* r : train) {
    train_x.push_back(r->x);
    norm_subjects.insert(r->subject);
  }
  const Normalizer norm = Normalizer::fit(train_x);
  for (std::size_t s : norm_subjects) fr.normalization_subjects.push_back(subjects[s]);

  const std::size_t classes = TaskSpec::of(task).class_count();
  std::vector<int> predictions;
  if (method == Method::Majority) {
    std::vector<std::size_t> counts(classes, 0);
    for (const auto* r : train) ++counts[static_cast<std::size_t>(r->label)];
    const int majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    predictions.assign(test.size(), majority);
    for (std::size_t s : norm_subjects) fr.gradient_subjects.push_back(subjects[s]);
  } else {
    FittedNetwork fit = fit_network(train, norm, method, classes, config, seed);
    for (int s : fit.session.gradient_subjects()) fr.gradient_subjects.push_back(subjects[static_cast<std::size_t>(s)]);
    predictions = fit.session.predict(to_matrix(test, norm));
  }

  for (std::size_t i = 0; i < test.size(); ++i) fr.correct += predictions[i] == test[i]->label ? 1 : 0;
  fr.accuracy = 100.0 * static_cast<double>(fr.correct) / static_cast<double>(test.size());

  // LOSO purity audit.
  const auto& held = fr.held_out;
  if (std::find(fr.normalization_subjects.begin(), fr.normalization_subjects.end(), held) !=
          fr.normalization_subjects.end() ||
      std::find(fr.gradient_subjects.begin(), fr.gradient_subjects.end(), held) !=
          fr.gradient_subjects.end()) {
    throw std::logic_error("LOSO purity violated for held-out subject " + held);
  }
  return fr;
}

}  // namespace

FoldReport run_loso(const Dataset& dataset, const SubjectGroup& group, TaskKind task, Method method,
                    const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  if (group.subjects.size() < 2) {
    throw ConfigError("group '" + group.name + "' needs at least 2 subjects for LOSO");
  }
  const TaskSpec spec = TaskSpec::of(task);
  std::map<std::string, std::size_t> subject_index;
  for (std::size_t i = 0; i < group.subjects.size(); ++i) subject_index[group.subjects[i]] = i;

  const std::vector<TaskRow> rows = task_rows(dataset, subject_index, spec, method);
  const AugmentMode aug = method_augmentation(method);
  if (rows.empty()) throw DataError("group '" + group.name + "' has no windows for task " + std::string(to_string(task)));

  FoldReport rep;
  rep.group = group.name;
  rep.task = task;
  rep.method = method;
  rep.config_hash = config.training_hash();
  rep.seed = seed;
  rep.model_config = method == Method::Majority
                         ? json{{"classifier", "majority"}, {"input_dim", feature_dim(aug)}}
                         : config.network_config(method, spec.class_count()).to_json();

  const std::size_t n_folds = group.subjects.size();
  rep.folds.resize(n_folds);
  std::vector<std::exception_ptr> errors(n_folds);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f = next++; f < n_folds; f = next++) {
      try {
        rep.folds[f] = run_fold(rows, group.subjects, f, task, method, config, fold_seed(seed, f));
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(config.workers, n_folds);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (const auto& f : rep.folds) {
    if (f.skipped) {
      ++rep.skipped_folds;
      continue;
    }
    rep.total_windows += f.test_windows;
    rep.total_correct += f.correct;
  }
  rep.pooled_accuracy = rep.total_windows == 0
                            ? 0.0
                            : 100.0 * static_cast<double>(rep.total_correct) / static_cast<double>(rep.total_windows);
  return rep;
}

TrainedModel train_on_dataset(const Dataset& dataset, TaskKind task, Method method,
                              const ExperimentConfig& config) {
  config.validate();
  if (method == Method::Majority) throw ConfigError("the majority baseline has no network to train");
  const TaskSpec spec = TaskSpec::of(task);
  std::map<std::string, std::size_t> subject_index;
  for (const auto& s : dataset.subjects()) subject_index.emplace(s.id, subject_index.size());
  const std::vector<TaskRow> rows = task_rows(dataset, subject_index, spec, method);
  if (rows.empty()) throw DataError("dataset has no windows for task " + std::string(to_string(task)));
  std::vector<const TaskRow*> train;
  FeatureRows xs;
  for (const auto& r : rows) {
    train.push_back(&r);
    xs.push_back(r.x);
  }
  Normalizer norm = Normalizer::fit(xs);
  FittedNetwork fit = fit_network(train, norm, method, spec.class_count(), config, config.seed);
  const auto pred = fit.session.predict(to_matrix(train, norm));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < train.size(); ++i) correct += pred[i] == train[i]->label ? 1 : 0;
  return {std::move(fit.session), std::move(norm), train.size(),
          100.0 * static_cast<double>(correct) / static_cast<double>(train.size())};
}

MatrixResult run_matrix(const Dataset& dataset, const ExperimentConfig& config, const ProgressFn& progress) {
  config.validate();
  if (config.methods.empty()) throw ConfigError("method list is empty");
  MatrixResult result;
  result.config_hash = config.training_hash();
  for (SchemeName sn : config.schemes) {
    const Scheme scheme = make_scheme(dataset, sn);
    for (const auto& group : scheme.groups) {
      for (Method m : config.methods) {
        for (TaskKind t : config.tasks) {
          MatrixCell cell{sn, group.name, t, m, std::nullopt, {}};
          try {
            cell.report = run_loso(dataset, group, t, m, config, config.seed);
          } catch (const Error& e) {
            cell.error = e.what();
          }
          if (progress) progress(cell);
          result.cells.push_back(std::move(cell));
        }
      }
    }
  }
  return result;
}

double MethodComparison::delta(const std::string& a, const std::string& b) const {
  for (const auto& d : deltas) {
    if (d.a == a && d.b == b) return d.delta;
  }
  throw ConfigError("no comparison between '" + a + "' and '" + b + "'");
}

MethodComparison compare_methods(const std::vector<MethodRow>& rows) {
  if (rows.empty()) throw ConfigError("no methods to compare");
  MethodComparison out;
  const auto& ref = rows.front().accuracy;
  if (ref.empty()) throw ConfigError("method '" + rows.front().method + "' has no task results");
  for (const auto& r : rows) {
    bool same = r.accuracy.size() == ref.size();
    for (auto it = r.accuracy.begin(), jt = ref.begin(); same && it != r.accuracy.end(); ++it, ++jt) {
      same = it->first == jt->first;
    }
    if (!same) throw DataError("method '" + r.method + "' covers a different task set");
    double sum = 0;
    for (const auto& [task, acc] : r.accuracy) sum += acc;
    out.means.emplace_back(r.method, sum / static_cast<double>(r.accuracy.size()));
  }
  for (const auto& [a, ma] : out.means) {
    for (const auto& [b, mb] : out.means) {
      if (a != b) out.deltas.push_back({a, b, ma - mb});
    }
  }
  return out;
}

}  // namespace hrvpain
