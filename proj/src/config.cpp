// SPDX-License-Identifier: Apache-2.0
#include "hrvpain/config.hpp"

#include <cstdio>
#include <fstream>

#include "hrvpain/error.hpp"

namespace hrvpain {

using nlohmann::json;

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string_view to_string(SdnnMode m) { return m == SdnnMode::Population ? "population" : "sample"; }
std::string_view to_string(SlopeAxis a) {
  return a == SlopeAxis::BeatIndex ? "beat-index" : "cumulative-time";
}

SdnnMode parse_sdnn(const std::string& s) {
  if (s == "population") return SdnnMode::Population;
  if (s == "sample") return SdnnMode::Sample;
  throw ConfigError("features.sdnn must be 'population' or 'sample'");
}

SlopeAxis parse_slope_axis(const std::string& s) {
  if (s == "beat-index") return SlopeAxis::BeatIndex;
  if (s == "cumulative-time") return SlopeAxis::CumulativeTime;
  throw ConfigError("features.slope_axis must be 'beat-index' or 'cumulative-time'");
}

void check_keys(const json& schema, const json& given, const std::string& path) {
  if (!given.is_object()) throw ConfigError("config section '" + path + "' must be an object");
  for (const auto& [key, value] : given.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + full + "'");
    if (schema[key].is_object()) check_keys(schema[key], value, full);
  }
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schemes.empty()) throw ConfigError("config lists no schemes");
  if (tasks.empty()) throw ConfigError("config lists no tasks");
  if (methods.empty()) throw ConfigError("config lists no methods");
  if (workers == 0) throw ConfigError("workers must be >= 1");
  detector.validate();
  train_config().validate();
  if (nn.encoder_widths.empty() || nn.head_width == 0 || nn.age_head_width < 2) {
    throw ConfigError("invalid network widths");
  }
}

json ExperimentConfig::to_json() const {
  json j;
  j["schemes"] = json::array();
  for (auto s : schemes) j["schemes"].push_back(hrvpain::to_string(s));
  j["tasks"] = json::array();
  for (auto t : tasks) j["tasks"].push_back(hrvpain::to_string(t));
  j["methods"] = json::array();
  for (auto m : methods) j["methods"].push_back(hrvpain::to_string(m));
  j["c1"] = mtl.c1;
  j["c2"] = mtl.c2;
  j["c3"] = mtl.c3;
  j["loss_form"] = hrvpain::to_string(mtl.loss_form);
  j["learn_task_weights"] = mtl.learn_task_weights;
  j["detector"] = {{"bandpass_low_hz", detector.bandpass_low_hz},
                   {"bandpass_high_hz", detector.bandpass_high_hz},
                   {"integration_window_ms", detector.integration_window_ms},
                   {"refractory_ms", detector.refractory_ms},
                   {"twave_window_ms", detector.twave_window_ms},
                   {"searchback_factor", detector.searchback_factor},
                   {"warmup_s", detector.warmup_s},
                   {"refine_margin_ms", detector.refine_margin_ms}};
  j["features"] = {{"sdnn", to_string(features.sdnn)},
                   {"slope_axis", to_string(features.slope_axis)}};
  j["nn"] = {{"epochs", nn.epochs},
             {"warmup_epochs", nn.warmup_epochs},
             {"learning_rate", nn.learning_rate},
             {"weight_decay", nn.weight_decay},
             {"label_smoothing", nn.label_smoothing},
             {"ema", nn.ema},
             {"ema_decay", nn.ema_decay},
             {"eval_with_ema", nn.eval_with_ema},
             {"batch_size", nn.batch_size},
             {"encoder_widths", nn.encoder_widths},
             {"head_width", nn.head_width},
             {"age_head_width", nn.age_head_width}};
  j["seed"] = seed;
  j["workers"] = workers;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& given) {
  const ExperimentConfig defaults;
  json j = defaults.to_json();
  check_keys(j, given, "");
  j.merge_patch(given);

  ExperimentConfig c;
  c.schemes.clear();
  for (const auto& s : get<std::vector<std::string>>(j, "schemes")) c.schemes.push_back(parse_scheme(s));
  c.tasks.clear();
  for (const auto& s : get<std::vector<std::string>>(j, "tasks")) c.tasks.push_back(parse_task(s));
  c.methods.clear();
  for (const auto& s : get<std::vector<std::string>>(j, "methods")) c.methods.push_back(parse_method(s));
  c.mtl.c1 = get<double>(j, "c1");
  c.mtl.c2 = get<double>(j, "c2");
  c.mtl.c3 = get<double>(j, "c3");
  c.mtl.loss_form = parse_loss_form(get<std::string>(j, "loss_form"));
  c.mtl.learn_task_weights = get<bool>(j, "learn_task_weights");

  const json& d = j["detector"];
  c.detector.bandpass_low_hz = get<double>(d, "bandpass_low_hz");
  c.detector.bandpass_high_hz = get<double>(d, "bandpass_high_hz");
  c.detector.integration_window_ms = get<double>(d, "integration_window_ms");
  c.detector.refractory_ms = get<double>(d, "refractory_ms");
  c.detector.twave_window_ms = get<double>(d, "twave_window_ms");
  c.detector.searchback_factor = get<double>(d, "searchback_factor");
  c.detector.warmup_s = get<double>(d, "warmup_s");
  c.detector.refine_margin_ms = get<double>(d, "refine_margin_ms");

  const json& f = j["features"];
  c.features.sdnn = parse_sdnn(get<std::string>(f, "sdnn"));
  c.features.slope_axis = parse_slope_axis(get<std::string>(f, "slope_axis"));

  const json& n = j["nn"];
  c.nn.epochs = get<int>(n, "epochs");
  c.nn.warmup_epochs = get<int>(n, "warmup_epochs");
  c.nn.learning_rate = get<double>(n, "learning_rate");
  c.nn.weight_decay = get<double>(n, "weight_decay");
  c.nn.label_smoothing = get<double>(n, "label_smoothing");
  c.nn.ema = get<bool>(n, "ema");
  c.nn.ema_decay = get<double>(n, "ema_decay");
  c.nn.eval_with_ema = get<bool>(n, "eval_with_ema");
  c.nn.batch_size = get<std::size_t>(n, "batch_size");
  c.nn.encoder_widths = get<std::vector<std::size_t>>(n, "encoder_widths");
  c.nn.head_width = get<std::size_t>(n, "head_width");
  c.nn.age_head_width = get<std::size_t>(n, "age_head_width");

  c.seed = get<std::uint64_t>(j, "seed");
  c.workers = get<std::size_t>(j, "workers");
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

namespace {

json override_patch(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json patch = json::object();
  json* node = &patch;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
  return patch;
}

}  // namespace

void ExperimentConfig::apply_override(std::string_view assignment) {
  apply_overrides(std::vector<std::string>{std::string(assignment)});
}

void ExperimentConfig::apply_overrides(const std::vector<std::string>& assignments) {
  json merged = to_json();
  for (const auto& a : assignments) {
    const json patch = override_patch(a);
    check_keys(merged, patch, "");
    merged.merge_patch(patch);
  }
  *this = from_json(merged);
}

std::string ExperimentConfig::training_hash() const {
  json j = to_json();
  j.erase("schemes");
  j.erase("tasks");
  j.erase("methods");
  j.erase("workers");
  return fnv1a_hex(j.dump());
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.epochs = nn.epochs;
  t.warmup_epochs = nn.warmup_epochs;
  t.learning_rate = nn.learning_rate;
  t.weight_decay = nn.weight_decay;
  t.label_smoothing = nn.label_smoothing;
  t.ema = nn.ema;
  t.ema_decay = nn.ema_decay;
  t.eval_with_ema = nn.eval_with_ema;
  t.batch_size = nn.batch_size;
  t.coefficients = {mtl.c1, mtl.c2, mtl.c3};
  t.loss_form = mtl.loss_form;
  t.learn_task_weights = mtl.learn_task_weights;
  return t;
}

NetworkConfig ExperimentConfig::network_config(Method method, std::size_t pain_classes) const {
  NetworkConfig c = method_is_multi_task(method)
                        ? mt_nn_config(feature_dim(method_augmentation(method)), pain_classes,
                                       method_tasks(method))
                        : st_nn_config(feature_dim(method_augmentation(method)), pain_classes);
  c.encoder_widths = nn.encoder_widths;
  c.head_width = nn.head_width;
  c.age_classes = nn.age_head_width;
  return c;
}

}  // namespace hrvpain
