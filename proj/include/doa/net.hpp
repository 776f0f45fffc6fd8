// SPDX-License-Identifier: Apache-2.0
//
// Dense ReLU network, backpropagation, AdamW, plateau schedule and the
// training loop.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "doa/cancel.hpp"
#include "doa/errors.hpp"
#include "doa/label_codec.hpp"
#include "doa/objective.hpp"
#include "doa/sim.hpp"

namespace doa {

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd biases;   // out
};

/// Parameters of a feedforward net; every layer but the last is followed by a
/// rectifier. Gradients use the same type.
struct Network {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols()); }
  std::size_t output_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weights.rows()); }

  /// Glorot-uniform weights, zero biases.
  static Network make(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                      std::size_t output_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Network net;
    std::size_t fan_in = input_dim;
    auto add = [&](std::size_t fan_out) {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> u(-a, a);
      DenseLayer l{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out))};
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) l.weights(r, c) = u(rng);
      }
      net.layers.push_back(std::move(l));
      fan_in = fan_out;
    };
    for (std::size_t h : hidden) add(h);
    add(output_dim);
    return net;
  }

  /// Same shapes, all zeros.
  Network zeros_like() const {
    Network z;
    for (const auto& l : layers) {
      z.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                          Eigen::VectorXd::Zero(l.biases.size())});
    }
    return z;
  }

  bool operator==(const Network& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].weights.rows() != o.layers[i].weights.rows() ||
          layers[i].weights.cols() != o.layers[i].weights.cols() ||
          layers[i].weights != o.layers[i].weights || layers[i].biases != o.layers[i].biases) {
        return false;
      }
    }
    return true;
  }
};

using Gradients = Network;

/// Layer inputs of the last batch forward pass; activations[0] is the batch.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;
};

/// Batch forward pass; columns of `x` are samples. Returns raw logits.
inline Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& x,
                                     ForwardCache* cache = nullptr) {
  if (static_cast<std::size_t>(x.rows()) != net.input_dim()) {
    throw DomainError("forward: feature length " + std::to_string(x.rows()) + ", network expects " +
                      std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  Eigen::MatrixXd h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    Eigen::MatrixXd z = l.weights * h;
    z.colwise() += l.biases;
    if (i + 1 < net.layers.size()) z = z.cwiseMax(0.0);
    if (cache && i + 1 < net.layers.size()) cache->activations.push_back(z);
    h = std::move(z);
  }
  return h;
}

inline std::vector<double> forward(const Network& net, std::span<const double> features) {
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
  const Eigen::MatrixXd k = forward_batch(net, x);
  return {k.data(), k.data() + k.size()};
}

/// Gradients of sum_j <grad.col(j), logits.col(j)> with respect to every
/// parameter, given the cache of the matching forward pass.
inline Gradients backward_batch(const Network& net, const ForwardCache& cache,
                                const Eigen::MatrixXd& grad_wrt_logits) {
  if (static_cast<std::size_t>(grad_wrt_logits.rows()) != net.output_dim()) {
    throw DomainError("backward: gradient length does not match the output layer");
  }
  Gradients g;
  g.layers.resize(net.layers.size());
  Eigen::MatrixXd delta = grad_wrt_logits;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const Eigen::MatrixXd& input = cache.activations[i];
    g.layers[i].weights = delta * input.transpose();
    g.layers[i].biases = delta.rowwise().sum();
    if (i > 0) {
      Eigen::MatrixXd back = net.layers[i].weights.transpose() * delta;
      delta = (input.array() > 0.0).select(back, 0.0);
    }
  }
  return g;
}

inline Gradients backward(const Network& net, std::span<const double> features,
                          std::span<const double> grad_wrt_logits) {
  ForwardCache cache;
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
  forward_batch(net, x, &cache);
  const Eigen::MatrixXd g = Eigen::Map<const Eigen::VectorXd>(grad_wrt_logits.data(), static_cast<Eigen::Index>(grad_wrt_logits.size()));
  return backward_batch(net, cache, g);
}

// ---------------------------------------------------------------------------
// AdamW

struct OptimizerState {
  Network first_moment;
  Network second_moment;
  std::uint64_t step_count = 0;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimizerState for_network(const Network& net, double lr = 1e-3, double weight_decay = 0.01) {
    OptimizerState s;
    s.first_moment = net.zeros_like();
    s.second_moment = net.zeros_like();
    s.lr = lr;
    s.weight_decay = weight_decay;
    return s;
  }
};

namespace detail {
template <class Param, class Moment>
void adamw_update(Param& p, Moment& m, Moment& v, const Moment& g, const OptimizerState& s,
                  double bias1, double bias2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  const auto m_hat = m.array() / bias1;
  const auto v_hat = v.array() / bias2;
  p.array() -= s.lr * (m_hat / (v_hat.sqrt() + s.eps) + s.weight_decay * p.array());
}
}  // namespace detail

/// One decoupled-weight-decay Adam step with bias-corrected moments.
inline void adamw_step(OptimizerState& state, Network& params, const Gradients& grads) {
  if (grads.layers.size() != params.layers.size() ||
      state.first_moment.layers.size() != params.layers.size()) {
    throw DomainError("adamw_step: parameter/gradient shape mismatch");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    detail::adamw_update(params.layers[i].weights, state.first_moment.layers[i].weights,
                         state.second_moment.layers[i].weights, grads.layers[i].weights, state,
                         bias1, bias2);
    detail::adamw_update(params.layers[i].biases, state.first_moment.layers[i].biases,
                         state.second_moment.layers[i].biases, grads.layers[i].biases, state,
                         bias1, bias2);
  }
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  double lr_init = 1e-3;
  double lr_reduced = 1e-4;
  std::size_t plateau_patience = 3;
  std::size_t early_stop_patience = 10;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  std::vector<std::size_t> hidden = {256, 256};

  void validate() const {
    if (batch_size == 0 || max_epochs == 0 || plateau_patience == 0 || early_stop_patience == 0) {
      throw ConfigError("batch_size, max_epochs and patience values must be positive");
    }
    if (!(lr_init > 0.0) || !(lr_reduced > 0.0) || !(lr_reduced < lr_init)) {
      throw ConfigError("need 0 < lr_reduced < lr_init");
    }
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  }
};

/// Tracks validation loss: one LR reduction after `plateau` non-improving
/// epochs, stop after `early_stop` non-improving epochs.
class PlateauSchedule {
 public:
  struct Step {
    bool improved = false;
    bool reduce_lr = false;
    bool stop = false;
  };

  PlateauSchedule(std::size_t plateau, std::size_t early_stop)
      : plateau_(plateau), early_stop_(early_stop) {}

  Step observe(double val_loss) {
    Step s;
    if (val_loss < best_) {
      best_ = val_loss;
      bad_ = 0;
      s.improved = true;
    } else {
      ++bad_;
    }
    if (!reduced_ && bad_ >= plateau_) {
      reduced_ = true;
      s.reduce_lr = true;
    }
    s.stop = bad_ >= early_stop_;
    return s;
  }

 private:
  std::size_t plateau_;
  std::size_t early_stop_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
  bool reduced_ = false;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_acc;
  std::vector<double> lr;  // rate used during each epoch
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  bool operator==(const TrainHistory&) const = default;
};

struct TrainResult {
  Network net;
  TrainHistory history;
};

inline Eigen::MatrixXd feature_matrix(std::span<const SceneSample> samples) {
  if (samples.empty()) return {};
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.front().features.size()),
                    static_cast<Eigen::Index>(samples.size()));
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (samples[j].features.size() != static_cast<std::size_t>(x.rows())) {
      throw DomainError("inconsistent feature lengths in dataset");
    }
    x.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(samples[j].features.data(), x.rows());
  }
  return x;
}

namespace detail {

// Mean objective and Top-1 accuracy (percent, over samples x heads).
inline std::pair<double, double> score(const Network& net, const Objective& obj,
                                       const Eigen::MatrixXd& x, std::span<const SceneSample> samples) {
  const Eigen::MatrixXd logits = forward_batch(net, x);
  const std::size_t n = obj.head_size();
  double loss = 0.0;
  std::size_t hits = 0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const std::span<const double> kappa(logits.col(static_cast<Eigen::Index>(j)).data(), obj.output_dim());
    loss += obj.evaluate(kappa, samples[j].doas_deg).value;
    const auto targets = align_ascending(samples[j].doas_deg);
    for (std::size_t h = 0; h < obj.num_sources; ++h) {
      const auto dist = obj.predict(kappa.subspan(h * n, n));
      const Position pos = Position::make(obj.space, targets[h]);
      if (static_cast<long>(peak_class(dist)) == round_class(pos.gamma)) ++hits;
    }
  }
  const double count = static_cast<double>(samples.size());
  return {loss / count, 100.0 * static_cast<double>(hits) / (count * static_cast<double>(obj.num_sources))};
}

}  // namespace detail

/// Mini-batch AdamW on the mean per-sample objective. Keeps the parameters of
/// the epoch with the best validation Top-1 accuracy (earlier epoch on ties).
inline TrainResult train(Network net, const Dataset& data, const Objective& objective,
                         const TrainConfig& config) {
  config.validate();
  objective.validate();
  if (data.train.empty() || data.validation.empty()) {
    throw DomainError("train: training and validation splits must be non-empty");
  }
  if (net.output_dim() != objective.output_dim()) {
    throw DomainError("train: network output size does not match the objective");
  }
  const Eigen::MatrixXd x_train = feature_matrix(data.train);
  const Eigen::MatrixXd x_val = feature_matrix(data.validation);
  const std::size_t n = data.train.size();

  OptimizerState opt = OptimizerState::for_network(net, config.lr_init, config.weight_decay);
  PlateauSchedule schedule(config.plateau_patience, config.early_stop_patience);
  TrainResult result{net, {}};
  double best_acc = -1.0;

  std::vector<std::size_t> order(n);
  ForwardCache cache;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    throw_if_cancelled();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      Eigen::MatrixXd xb(x_train.rows(), static_cast<Eigen::Index>(b));
      for (std::size_t j = 0; j < b; ++j) {
        xb.col(static_cast<Eigen::Index>(j)) = x_train.col(static_cast<Eigen::Index>(order[start + j]));
      }
      const Eigen::MatrixXd logits = forward_batch(net, xb, &cache);
      Eigen::MatrixXd grad(logits.rows(), logits.cols());
      for (std::size_t j = 0; j < b; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        const LossResult r = objective.evaluate(
            std::span<const double>(logits.col(col).data(), static_cast<std::size_t>(logits.rows())),
            data.train[order[start + j]].doas_deg);
        epoch_loss += r.value;
        grad.col(col) = Eigen::Map<const Eigen::VectorXd>(r.grad_wrt_logits.data(), logits.rows()) /
                        static_cast<double>(b);
      }
      adamw_step(opt, net, backward_batch(net, cache, grad));
    }

    const auto [val_loss, val_acc] = detail::score(net, objective, x_val, data.validation);
    auto& h = result.history;
    h.train_loss.push_back(epoch_loss / static_cast<double>(n));
    h.val_loss.push_back(val_loss);
    h.val_acc.push_back(val_acc);
    h.lr.push_back(opt.lr);
    if (val_acc > best_acc) {
      best_acc = val_acc;
      result.net = net;
      h.best_epoch = epoch;
    }
    const auto step = schedule.observe(val_loss);
    if (step.reduce_lr) opt.lr = config.lr_reduced;
    if (step.stop) {
      h.stopped_early = true;
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json network_to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers) {
    std::vector<double> w(static_cast<std::size_t>(l.weights.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data(), l.weights.rows(), l.weights.cols()) = l.weights;
    layers.push_back({{"rows", l.weights.rows()},
                      {"cols", l.weights.cols()},
                      {"weights", w},
                      {"biases", std::vector<double>(l.biases.data(), l.biases.data() + l.biases.size())}});
  }
  return layers;
}

/// Validates the shape table: sizes match and consecutive layers compose.
inline Network network_from_json(const nlohmann::json& layers) {
  Network net;
  Eigen::Index prev_out = -1;
  for (const auto& jl : layers) {
    const auto rows = jl.at("rows").get<Eigen::Index>();
    const auto cols = jl.at("cols").get<Eigen::Index>();
    const auto w = jl.at("weights").get<std::vector<double>>();
    const auto b = jl.at("biases").get<std::vector<double>>();
    if (rows <= 0 || cols <= 0 || static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows) {
      throw IoError("checkpoint layer " + std::to_string(net.layers.size()) + " has an inconsistent shape");
    }
    if (prev_out >= 0 && cols != prev_out) {
      throw IoError("checkpoint layer " + std::to_string(net.layers.size()) + " does not compose with its predecessor");
    }
    DenseLayer l;
    l.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data(), rows, cols);
    l.biases = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
    net.layers.push_back(std::move(l));
    prev_out = rows;
  }
  if (net.layers.empty()) throw IoError("checkpoint has no layers");
  return net;
}

}  // namespace doa
