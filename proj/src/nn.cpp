// SPDX-License-Identifier: Apache-2.0
#include "hrvpain/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "hrvpain/error.hpp"

namespace hrvpain::nn {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Eigen::Map<const Matrix> DenseLayer::weights(std::span<const double> params) const {
  return {params.data() + offset, static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(n_in)};
}
Eigen::Map<const Vector> DenseLayer::bias(std::span<const double> params) const {
  return {params.data() + bias_offset(), static_cast<Eigen::Index>(n_out)};
}
Eigen::Map<Matrix> DenseLayer::weights(std::span<double> params) const {
  return {params.data() + offset, static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(n_in)};
}
Eigen::Map<Vector> DenseLayer::bias(std::span<double> params) const {
  return {params.data() + bias_offset(), static_cast<Eigen::Index>(n_out)};
}

Vector dense_forward(const DenseLayer& layer, std::span<const double> params,
                     const Vector& input) {
  if (static_cast<std::size_t>(input.size()) != layer.n_in) {
    throw ConfigError("dense layer expects " + std::to_string(layer.n_in) + " inputs, got " +
                      std::to_string(input.size()));
  }
  if (params.size() < layer.offset + layer.param_count()) {
    throw ConfigError("parameter buffer too small for layer");
  }
  Vector z = layer.weights(params) * input;
  z += layer.bias(params);
  return z;
}

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

void DenseStack::add(std::size_t n_in, std::size_t n_out, bool relu, std::size_t offset) {
  if (n_in == 0 || n_out == 0) throw ConfigError("dense layer dimensions must be positive");
  if (!layers_.empty() && layers_.back().n_out != n_in) {
    throw ConfigError("dense stack layers do not chain");
  }
  layers_.push_back({n_in, n_out, offset, relu});
}

std::size_t DenseStack::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.param_count();
  return n;
}

Matrix DenseStack::forward(std::span<const double> params, const Matrix& x,
                           StackCache* cache) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim()) {
    throw ConfigError("input has " + std::to_string(x.rows()) + " rows, stack expects " +
                      std::to_string(input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix a = x;
  for (const auto& l : layers_) {
    Matrix z(static_cast<Eigen::Index>(l.n_out), a.cols());
    z.noalias() = l.weights(params) * a;
    z.colwise() += l.bias(params);
    if (cache) cache->inputs.push_back(std::move(a));
    if (l.relu) {
      a = relu(z);
    } else {
      a = z;
    }
    if (cache) cache->pre_activations.push_back(std::move(z));
  }
  return a;
}

Matrix DenseStack::backward(std::span<const double> params, const StackCache& cache,
                            Matrix d_out, std::span<double> grads) const {
  Matrix d = std::move(d_out);
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    if (l.relu) {
      // Zero subgradient at z == 0.
      d = (cache.pre_activations[k].array() > 0.0).select(d, 0.0);
    }
    l.weights(grads).noalias() = d * cache.inputs[k].transpose();
    l.bias(grads) = d.rowwise().sum();
    Matrix dx(static_cast<Eigen::Index>(l.n_in), d.cols());
    dx.noalias() = l.weights(params).transpose() * d;
    d = std::move(dx);
  }
  return d;
}

std::uint64_t DenseStack::activation_signature(const StackCache& cache, std::uint64_t seed) {
  std::uint64_t h = seed ^ 0xcbf29ce484222325ULL;
  for (std::size_t k = 0; k < cache.pre_activations.size(); ++k) {
    const Matrix& z = cache.pre_activations[k];
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      h ^= (z.data()[i] > 0.0) ? 1u : 0u;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void he_uniform_init(const DenseLayer& layer, std::span<double> params, std::uint64_t& rng_state) {
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.n_in));
  auto w = layer.weights(params);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    // 53 random bits mapped onto [-limit, limit).
    const double u = static_cast<double>(splitmix64(rng_state) >> 11) * 0x1.0p-53;
    w.data()[i] = (2.0 * u - 1.0) * limit;
  }
  layer.bias(params).setZero();
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0;
  for (double v : logits) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> smoothed_targets(std::size_t n_out, std::size_t true_class, double epsilon) {
  if (n_out < 2) throw ConfigError("label smoothing needs at least two classes");
  if (!(epsilon >= 0 && epsilon < 1)) throw ConfigError("label smoothing must be in [0, 1)");
  if (true_class >= n_out) throw ConfigError("class index out of range");
  std::vector<double> p(n_out, epsilon / static_cast<double>(n_out - 1));
  p[true_class] = 1.0 - epsilon;
  return p;
}

double smoothed_cross_entropy(std::span<const double> logits, std::size_t true_class,
                              double epsilon) {
  const auto p = smoothed_targets(logits.size(), true_class, epsilon);
  const auto lq = log_softmax(logits);
  double loss = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != 0) loss -= p[i] * lq[i];
  }
  return loss;
}

double cross_entropy(std::span<const double> logits, std::size_t true_class) {
  if (true_class >= logits.size()) throw ConfigError("class index out of range");
  return -log_softmax(logits)[true_class];
}

double smoothed_cross_entropy_batch(const Matrix& logits, std::span<const int> classes,
                                    double epsilon, Matrix* grad, double grad_scale) {
  const auto n_out = static_cast<std::size_t>(logits.rows());
  const auto batch = static_cast<std::size_t>(logits.cols());
  if (classes.size() != batch) throw ConfigError("label count does not match batch size");
  if (batch == 0) throw ConfigError("empty batch");
  if (n_out < 2) throw ConfigError("label smoothing needs at least two classes");
  if (!(epsilon >= 0 && epsilon < 1)) throw ConfigError("label smoothing must be in [0, 1)");
  const double off = epsilon / static_cast<double>(n_out - 1);
  const double inv_b = 1.0 / static_cast<double>(batch);
  if (grad) grad->resize(logits.rows(), logits.cols());

  double total = 0;
  std::vector<double> lq(n_out);
  for (std::size_t c = 0; c < batch; ++c) {
    const int cls = classes[c];
    if (cls < 0 || static_cast<std::size_t>(cls) >= n_out) {
      throw ConfigError("class index out of range");
    }
    const auto col = logits.col(static_cast<Eigen::Index>(c));
    const double mx = col.maxCoeff();
    double s = 0;
    for (std::size_t i = 0; i < n_out; ++i) s += std::exp(col(static_cast<Eigen::Index>(i)) - mx);
    const double lse = mx + std::log(s);
    double loss = 0;
    for (std::size_t i = 0; i < n_out; ++i) {
      lq[i] = col(static_cast<Eigen::Index>(i)) - lse;
      const double p = static_cast<std::size_t>(cls) == i ? 1.0 - epsilon : off;
      if (p != 0) loss -= p * lq[i];
      if (grad) {
        (*grad)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            (std::exp(lq[i]) - p) * inv_b * grad_scale;
      }
    }
    total += loss;
  }
  return total * inv_b;
}

AdamW::AdamW(std::size_t n, AdamWConfig config, std::vector<unsigned char> decay_mask,
             std::vector<unsigned char> train_mask)
    : config_(config),
      m_(n, 0.0),
      v_(n, 0.0),
      decay_mask_(std::move(decay_mask)),
      train_mask_(std::move(train_mask)) {
  if (!decay_mask_.empty() && decay_mask_.size() != n) throw ConfigError("decay mask size mismatch");
  if (!train_mask_.empty() && train_mask_.size() != n) throw ConfigError("train mask size mismatch");
}

void AdamW::step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ConfigError("AdamW shape mismatch");
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double shrink = 1.0 - lr * config_.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!train_mask_.empty() && !train_mask_[i]) continue;
    if (decay_mask_.empty() || decay_mask_[i]) params[i] *= shrink;
    const double g = grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
  }
}

void AdamW::restore(std::uint64_t step, ParamVector m, ParamVector v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw ConfigError("AdamW restore shape mismatch");
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

void LrSchedule::validate() const {
  if (!(base_lr >= 0)) throw ConfigError("learning rate must be >= 0");
  if (warmup_epochs < 0 || total_epochs <= 0 || warmup_epochs >= total_epochs) {
    throw ConfigError("schedule needs 0 <= warmup_epochs < total_epochs");
  }
}

double LrSchedule::lr_at(int epoch) const {
  if (epoch < 0 || epoch >= total_epochs) {
    throw ConfigError("epoch " + std::to_string(epoch) + " outside [0, " +
                      std::to_string(total_epochs) + ")");
  }
  if (epoch < warmup_epochs) {
    return base_lr * static_cast<double>(epoch) / static_cast<double>(warmup_epochs);
  }
  const double progress = static_cast<double>(epoch - warmup_epochs) /
                          static_cast<double>(total_epochs - warmup_epochs);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

Ema::Ema(std::span<const double> params, double decay)
    : shadow_(params.begin(), params.end()), decay_(decay) {
  if (!(decay >= 0 && decay < 1)) throw ConfigError("EMA decay must be in [0, 1)");
}

void Ema::update(std::span<const double> params) {
  if (params.size() != shadow_.size()) throw ConfigError("EMA shape mismatch");
  const double keep = decay_, take = 1.0 - decay_;
  for (std::size_t i = 0; i < shadow_.size(); ++i) {
    shadow_[i] = keep * shadow_[i] + take * params[i];
  }
}

EmaSwap::EmaSwap(Ema& ema, ParamVector& live) : ema_(ema), live_(live) {
  if (ema_.shadow().size() != live_.size()) throw ConfigError("EMA shape mismatch");
  std::swap(ema_.shadow(), live_);
}

EmaSwap::~EmaSwap() { std::swap(ema_.shadow(), live_); }

namespace {

constexpr char kMagic[8] = {'H', 'R', 'V', 'P', 'C', 'K', 'P', 'T'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& os, std::span<const double> xs) {
  write_u64(os, xs.size());
  for (double x : xs) write_u64(os, std::bit_cast<std::uint64_t>(x));
}

ParamVector read_doubles(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  if (n > (1ULL << 34)) throw DataError("corrupt checkpoint section length");
  ParamVector xs(n);
  for (auto& x : xs) x = std::bit_cast<double>(read_u64(is));
  return xs;
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  nlohmann::json meta = {{"config_hash", config_hash}, {"optimizer_step", optimizer_step}};
  meta["model"] = header_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(header_json);
  const std::string header = meta.dump();
  os.write(kMagic, sizeof kMagic);
  write_u64(os, kVersion);
  write_u64(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_doubles(os, params);
  write_doubles(os, ema_shadow);
  write_doubles(os, adam_m);
  write_doubles(os, adam_v);
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError("not a checkpoint file: " + path.string());
  }
  const std::uint64_t version = read_u64(is);
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t hlen = read_u64(is);
  std::string header(hlen, '\0');
  if (!is.read(header.data(), static_cast<std::streamsize>(hlen))) throw DataError("truncated checkpoint");
  const auto meta = nlohmann::json::parse(header);
  Checkpoint ck;
  ck.config_hash = meta.at("config_hash").get<std::string>();
  ck.optimizer_step = meta.at("optimizer_step").get<std::uint64_t>();
  ck.header_json = meta.at("model").dump();
  ck.params = read_doubles(is);
  ck.ema_shadow = read_doubles(is);
  ck.adam_m = read_doubles(is);
  ck.adam_v = read_doubles(is);
  return ck;
}

}  // namespace hrvpain::nn
