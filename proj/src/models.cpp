// SPDX-License-Identifier: Apache-2.0
#include "hrvpain/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hrvpain/error.hpp"

namespace hrvpain {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t uniform_index(std::uint64_t& state, std::size_t n) {
  return static_cast<std::size_t>(splitmix64(state) % n);
}

bool all_finite(const nn::Matrix& m) { return m.allFinite(); }

}  // namespace

std::string_view to_string(LossForm f) {
  return f == LossForm::PaperLiteral ? "paper-literal" : "kendall-corrected";
}

LossForm parse_loss_form(std::string_view s) {
  if (s == "paper-literal" || s == "PaperLiteral") return LossForm::PaperLiteral;
  if (s == "kendall-corrected" || s == "KendallCorrected") return LossForm::KendallCorrected;
  throw ConfigError("unknown loss form '" + std::string(s) + "'");
}

void NetworkConfig::validate() const {
  if (input_dim < 6 || input_dim > 8) {
    throw ConfigError("input_dim must be 6, 7, or 8 (got " + std::to_string(input_dim) + ")");
  }
  if (encoder_widths.empty()) throw ConfigError("encoder needs at least one layer");
  for (auto w : encoder_widths) {
    if (w == 0) throw ConfigError("encoder widths must be positive");
  }
  if (head_width == 0) throw ConfigError("head width must be positive");
  if (pain_classes != 2 && pain_classes != 5) throw ConfigError("pain head must have 2 or 5 classes");
  if (!tasks.pain) throw ConfigError("task set must contain Pain");
  if (tasks.age && age_classes < 2) throw ConfigError("age head needs at least 2 classes");
  if (tasks.gender && gender_classes < 2) throw ConfigError("gender head needs at least 2 classes");
  if (!multi_task && (tasks.age || tasks.gender)) {
    throw ConfigError("auxiliary heads require a multi-task network");
  }
}

nlohmann::json NetworkConfig::to_json() const {
  return {{"input_dim", input_dim},
          {"encoder_widths", encoder_widths},
          {"head_width", head_width},
          {"pain_classes", pain_classes},
          {"age_classes", age_classes},
          {"gender_classes", gender_classes},
          {"tasks", {{"pain", tasks.pain}, {"age", tasks.age}, {"gender", tasks.gender}}},
          {"multi_task", multi_task}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.encoder_widths = j.at("encoder_widths").get<std::vector<std::size_t>>();
  c.head_width = j.at("head_width").get<std::size_t>();
  c.pain_classes = j.at("pain_classes").get<std::size_t>();
  c.age_classes = j.at("age_classes").get<std::size_t>();
  c.gender_classes = j.at("gender_classes").get<std::size_t>();
  c.tasks.pain = j.at("tasks").at("pain").get<bool>();
  c.tasks.age = j.at("tasks").at("age").get<bool>();
  c.tasks.gender = j.at("tasks").at("gender").get<bool>();
  c.multi_task = j.at("multi_task").get<bool>();
  return c;
}

NetworkConfig st_nn_config(std::size_t input_dim, std::size_t pain_classes) {
  NetworkConfig c;
  c.input_dim = input_dim;
  c.pain_classes = pain_classes;
  return c;
}

NetworkConfig mt_nn_config(std::size_t input_dim, std::size_t pain_classes, TaskSet tasks) {
  NetworkConfig c = st_nn_config(input_dim, pain_classes);
  c.tasks = tasks;
  c.multi_task = true;
  return c;
}

PainNetwork PainNetwork::build(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  PainNetwork net;
  net.config_ = config;
  std::size_t offset = 0;
  auto add = [&](nn::DenseStack& s, std::size_t in, std::size_t out, bool relu) {
    s.add(in, out, relu, offset);
    offset += in * out + out;
  };

  std::size_t width = config.input_dim;
  for (std::size_t w : config.encoder_widths) {
    add(net.encoder_, width, w, true);
    width = w;
  }
  const std::size_t feat = width;
  auto make_head = [&](std::size_t classes) {
    nn::DenseStack head;
    add(head, feat, config.head_width, false);
    add(head, config.head_width, classes, false);
    return head;
  };
  net.pain_ = make_head(config.pain_classes);
  if (config.tasks.age) net.age_ = make_head(config.age_classes);
  if (config.tasks.gender) net.gender_ = make_head(config.gender_classes);
  if (config.multi_task) {
    net.task_weight_offset_ = offset;
    offset += 3;
  }

  net.params_.assign(offset, 0.0);
  std::uint64_t rng = seed;
  for (const auto& l : net.all_layers()) nn::he_uniform_init(l, net.params_, rng);
  return net;
}

std::array<double, 3> PainNetwork::task_weights() const {
  if (!task_weight_offset_) return {0, 0, 0};
  const std::size_t o = *task_weight_offset_;
  return {params_[o], params_[o + 1], params_[o + 2]};
}

std::vector<nn::DenseLayer> PainNetwork::all_layers() const {
  std::vector<nn::DenseLayer> out;
  auto append = [&](const nn::DenseStack& s) {
    out.insert(out.end(), s.layers().begin(), s.layers().end());
  };
  append(encoder_);
  append(pain_);
  if (age_) append(*age_);
  if (gender_) append(*gender_);
  return out;
}

NetworkOutput PainNetwork::forward(const nn::Matrix& x, ForwardCache* cache) const {
  return forward_with(params_, x, cache);
}

NetworkOutput PainNetwork::forward_with(std::span<const double> params, const nn::Matrix& x,
                                        ForwardCache* cache) const {
  if (params.size() != params_.size()) throw ConfigError("parameter vector size mismatch");
  NetworkOutput out;
  nn::Matrix h = encoder_.forward(params, x, cache ? &cache->encoder : nullptr);
  out.pain = pain_.forward(params, h, cache ? &cache->pain : nullptr);
  if (age_) out.age = age_->forward(params, h, cache ? &cache->age : nullptr);
  if (gender_) out.gender = gender_->forward(params, h, cache ? &cache->gender : nullptr);
  if (cache) cache->features = std::move(h);
  return out;
}

PainNetwork build_st_nn(const NetworkConfig& config, std::uint64_t seed) {
  NetworkConfig c = config;
  if (c.multi_task || c.tasks.age || c.tasks.gender) {
    throw ConfigError("single-task network cannot carry auxiliary heads");
  }
  return PainNetwork::build(c, seed);
}

PainNetwork build_mt_nn(const NetworkConfig& config, std::uint64_t seed) {
  NetworkConfig c = config;
  c.multi_task = true;
  return PainNetwork::build(c, seed);
}

MtlLossResult mtl_loss(double l_pain, std::optional<double> l_age, std::optional<double> l_gender,
                       const MtlLossParams& params, LossForm form) {
  const std::array<std::optional<double>, 3> losses{l_pain, l_age, l_gender};
  MtlLossResult r;
  for (std::size_t k = 0; k < 3; ++k) {
    if (!std::isfinite(params.w[k]) || !std::isfinite(params.c[k])) {
      throw NumericalError("non-finite task weight or coefficient");
    }
    if (params.c[k] < 0) throw ConfigError("task coefficients must be >= 0");
    if (!losses[k]) continue;
    const double l = *losses[k];
    if (!std::isfinite(l)) throw NumericalError("non-finite task loss");
    const double w = params.w[k], c = params.c[k];
    const double scale = form == LossForm::PaperLiteral ? std::exp(w) : std::exp(-w);
    r.contributions[k] = (scale * l + w) * c;
    r.d_loss[k] = c * scale;
    r.d_weight[k] = form == LossForm::PaperLiteral ? c * (scale * l + 1.0) : c * (1.0 - scale * l);
    r.total += r.contributions[k];
  }
  return r;
}

LossBreakdown forward_loss(const PainNetwork& net, std::span<const double> params,
                           const Batch& batch, const LossSpec& spec, std::span<double> grads,
                           std::uint64_t* signature) {
  const auto& cfg = net.config();
  const bool want_grad = !grads.empty();
  if (want_grad && grads.size() != params.size()) throw ConfigError("gradient buffer size mismatch");
  const std::size_t b = static_cast<std::size_t>(batch.x.cols());
  if (batch.pain.size() != b) throw DataError("missing pain labels for batch");
  if (cfg.tasks.age && batch.age.size() != b) throw DataError("missing age labels for active age task");
  if (cfg.tasks.gender && batch.gender.size() != b) {
    throw DataError("missing gender labels for active gender task");
  }

  ForwardCache cache;
  const bool need_cache = want_grad || signature;
  NetworkOutput out = net.forward_with(params, batch.x, need_cache ? &cache : nullptr);
  if (!all_finite(out.pain) || (out.age && !all_finite(*out.age)) ||
      (out.gender && !all_finite(*out.gender))) {
    throw NumericalError("non-finite network output");
  }
  if (signature) {
    std::uint64_t h = nn::DenseStack::activation_signature(cache.encoder);
    h = nn::DenseStack::activation_signature(cache.pain, h);
    if (net.age_head()) h = nn::DenseStack::activation_signature(cache.age, h);
    if (net.gender_head()) h = nn::DenseStack::activation_signature(cache.gender, h);
    *signature = h;
  }

  MtlLossParams mp;
  mp.c = spec.coefficients;
  if (const auto off = net.task_weight_offset()) {
    for (std::size_t k = 0; k < 3; ++k) mp.w[k] = params[*off + k];
  }
  // Loss-scale for each head's logits gradient; for single-task nets it is 1.
  std::array<double, 3> scale{1.0, 0.0, 0.0};
  if (cfg.multi_task) {
    for (std::size_t k = 0; k < 3; ++k) {
      const double e = spec.form == LossForm::PaperLiteral ? std::exp(mp.w[k]) : std::exp(-mp.w[k]);
      scale[k] = mp.c[k] * e;
    }
  }

  LossBreakdown lb;
  nn::Matrix d_pain, d_age, d_gender;
  lb.pain = nn::smoothed_cross_entropy_batch(out.pain, batch.pain, spec.label_smoothing,
                                             want_grad ? &d_pain : nullptr, scale[0]);
  if (out.age) {
    lb.age = nn::smoothed_cross_entropy_batch(*out.age, batch.age, spec.label_smoothing,
                                              want_grad ? &d_age : nullptr, scale[1]);
  }
  if (out.gender) {
    lb.gender = nn::smoothed_cross_entropy_batch(*out.gender, batch.gender, spec.label_smoothing,
                                                 want_grad ? &d_gender : nullptr, scale[2]);
  }

  MtlLossResult mtl;
  if (cfg.multi_task) {
    mtl = mtl_loss(lb.pain, lb.age, lb.gender, mp, spec.form);
    lb.total = mtl.total;
  } else {
    lb.total = lb.pain;
  }
  if (!std::isfinite(lb.total)) throw NumericalError("non-finite loss");

  if (want_grad) {
    nn::Matrix d_feat = net.pain_head().backward(params, cache.pain, std::move(d_pain), grads);
    if (net.age_head()) d_feat += net.age_head()->backward(params, cache.age, std::move(d_age), grads);
    if (net.gender_head()) {
      d_feat += net.gender_head()->backward(params, cache.gender, std::move(d_gender), grads);
    }
    net.encoder().backward(params, cache.encoder, std::move(d_feat), grads);
    if (const auto off = net.task_weight_offset()) {
      for (std::size_t k = 0; k < 3; ++k) grads[*off + k] = mtl.d_weight[k];
    }
  }
  return lb;
}

GradCheckReport gradient_check(const PainNetwork& net, const Batch& batch, const LossSpec& spec,
                               const GradCheckOptions& options) {
  GradCheckReport report;
  nn::ParamVector params = net.params();
  nn::ParamVector grads(params.size(), 0.0);
  std::uint64_t base_sig = 0;
  try {
    forward_loss(net, params, batch, spec, grads, &base_sig);
  } catch (const NumericalError& e) {
    report.numerical_failure = true;
    report.failure = e.what();
    return report;
  }

  // Candidate order: w1..w3 first, then round-robin over every weight and
  // bias tensor so each layer is represented.
  std::vector<std::pair<std::size_t, std::size_t>> tensors;
  for (const auto& l : net.all_layers()) {
    tensors.emplace_back(l.offset, l.weight_count());
    tensors.emplace_back(l.bias_offset(), l.n_out);
  }
  std::uint64_t rng = options.seed ^ 0x5eed5eedULL;
  std::vector<std::size_t> candidates;
  if (const auto off = net.task_weight_offset()) {
    for (std::size_t k = 0; k < 3; ++k) candidates.push_back(*off + k);
  }
  const std::size_t rounds = options.sample_count * 4 / std::max<std::size_t>(1, tensors.size()) + 4;
  for (std::size_t r = 0; r < rounds; ++r) {
    for (const auto& [start, count] : tensors) candidates.push_back(start + uniform_index(rng, count));
  }

  std::vector<std::size_t> seen;
  for (std::size_t idx : candidates) {
    if (report.checked >= options.sample_count) break;
    if (std::find(seen.begin(), seen.end(), idx) != seen.end()) continue;
    seen.push_back(idx);
    const double orig = params[idx];
    std::uint64_t sig_plus = 0, sig_minus = 0;
    double lp = 0, lm = 0;
    try {
      params[idx] = orig + options.step;
      lp = forward_loss(net, params, batch, spec, {}, &sig_plus).total;
      params[idx] = orig - options.step;
      lm = forward_loss(net, params, batch, spec, {}, &sig_minus).total;
    } catch (const NumericalError& e) {
      params[idx] = orig;
      report.numerical_failure = true;
      report.failure = e.what();
      return report;
    }
    params[idx] = orig;
    if (sig_plus != base_sig || sig_minus != base_sig) {
      ++report.kinks_skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2.0 * options.step);
    const double analytic = grads[idx] * options.corrupt_factor;
    const double denom =
        std::max({std::abs(analytic), std::abs(numeric), options.denominator_floor});
    const double rel = std::abs(analytic - numeric) / denom;
    report.entries.push_back({idx, analytic, numeric, rel});
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.checked;
  }
  report.passed = report.checked > 0 && report.max_rel_error <= options.tolerance;
  return report;
}

void TrainConfig::validate() const {
  schedule().validate();
  if (!(weight_decay >= 0)) throw ConfigError("weight decay must be >= 0");
  if (!(label_smoothing >= 0 && label_smoothing < 1)) throw ConfigError("label smoothing must be in [0, 1)");
  if (!(ema_decay >= 0 && ema_decay < 1)) throw ConfigError("EMA decay must be in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  for (double c : coefficients) {
    if (!(c >= 0) || !std::isfinite(c)) throw ConfigError("task coefficients must be finite and >= 0");
  }
}

LossSpec TrainConfig::loss_spec() const { return {label_smoothing, coefficients, loss_form}; }

nn::LrSchedule TrainConfig::schedule() const { return {learning_rate, warmup_epochs, epochs}; }

Batch TrainingData::gather(std::span<const std::size_t> columns) const {
  Batch b;
  b.x.resize(x.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    b.x.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(columns[i]));
    b.pain.push_back(pain[columns[i]]);
    if (!age.empty()) b.age.push_back(age[columns[i]]);
    if (!gender.empty()) b.gender.push_back(gender[columns[i]]);
  }
  return b;
}

TrainingSession::TrainingSession(PainNetwork net, const TrainConfig& config, std::uint64_t seed)
    : net_(std::move(net)), config_(config), loss_(config.loss_spec()), shuffle_state_(seed) {
  config_.validate();
  const std::size_t n = net_.param_count();
  std::vector<unsigned char> decay(n, 1), train(n, 1);
  if (const auto off = net_.task_weight_offset()) {
    for (std::size_t k = 0; k < 3; ++k) {
      decay[*off + k] = 0;
      if (!config_.learn_task_weights) train[*off + k] = 0;
    }
  }
  opt_ = nn::AdamW(n, {0.9, 0.999, 1e-8, config_.weight_decay}, std::move(decay), std::move(train));
  if (config_.ema) ema_.emplace(net_.params(), config_.ema_decay);
  grads_.assign(n, 0.0);
}

LossBreakdown TrainingSession::step(const Batch& batch, double lr) {
  std::fill(grads_.begin(), grads_.end(), 0.0);
  const LossBreakdown lb = forward_loss(net_, net_.params(), batch, loss_, grads_);
  opt_.step(net_.params(), grads_, lr);
  for (double p : net_.params()) {
    if (!std::isfinite(p)) throw NumericalError("non-finite parameter after optimiser step");
  }
  if (ema_) ema_->update(net_.params());
  return lb;
}

double TrainingSession::run_epoch(const TrainingData& data, int epoch) {
  const double lr = config_.schedule().lr_at(epoch);
  const std::size_t n = data.size();
  if (n == 0) throw DataError("empty training set");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[uniform_index(shuffle_state_, i + 1)]);

  double total = 0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += config_.batch_size) {
    const std::size_t end = std::min(n, start + config_.batch_size);
    const std::span<const std::size_t> cols(order.data() + start, end - start);
    for (std::size_t c : cols) {
      if (!data.subject.empty()) gradient_subjects_.insert(data.subject[c]);
    }
    total += step(data.gather(cols), lr).total;
    ++batches;
  }
  return total / static_cast<double>(batches);
}

void TrainingSession::fit(const TrainingData& data) {
  for (int e = 0; e < config_.epochs; ++e) run_epoch(data, e);
}

std::vector<int> TrainingSession::predict(const nn::Matrix& x) {
  auto argmax = [](const nn::Matrix& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.cols()));
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      Eigen::Index best = 0;
      logits.col(c).maxCoeff(&best);
      out[static_cast<std::size_t>(c)] = static_cast<int>(best);
    }
    return out;
  };
  if (ema_ && config_.eval_with_ema) {
    nn::EmaSwap swap(*ema_, net_.params());
    return argmax(net_.forward(x).pain);
  }
  return argmax(net_.forward(x).pain);
}

nn::Checkpoint TrainingSession::checkpoint(const std::string& config_hash) const {
  nn::Checkpoint ck;
  ck.header_json = net_.config().to_json().dump();
  ck.config_hash = config_hash;
  ck.optimizer_step = opt_.step_count();
  ck.params = net_.params();
  if (ema_) ck.ema_shadow = ema_->shadow();
  ck.adam_m = opt_.first_moment();
  ck.adam_v = opt_.second_moment();
  return ck;
}

TrainingSession TrainingSession::restore(const nn::Checkpoint& ck, const TrainConfig& config,
                                         std::uint64_t seed) {
  const auto net_config = NetworkConfig::from_json(nlohmann::json::parse(ck.header_json));
  PainNetwork net = PainNetwork::build(net_config, 0);
  if (ck.params.size() != net.param_count()) throw DataError("checkpoint parameter count mismatch");
  net.params() = ck.params;
  TrainingSession s(std::move(net), config, seed);
  s.opt_.restore(ck.optimizer_step, ck.adam_m, ck.adam_v);
  if (s.ema_) {
    if (ck.ema_shadow.size() != ck.params.size()) throw DataError("checkpoint lacks EMA shadow");
    s.ema_->shadow() = ck.ema_shadow;
  }
  return s;
}

}  // namespace hrvpain
