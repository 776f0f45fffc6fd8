// SPDX-License-Identifier: Apache-2.0
//
// Training losses over raw logits, each returning its value and the gradient
// with respect to the logits (chained through the paired output activation).
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doa/errors.hpp"
#include "doa/label_codec.hpp"

namespace doa {

enum class Activation { Softmax, Sigmoid, ClampIdentity };

enum class LossKind { CE, BCE, MSE, WD, NLAE, MSEwo };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Softmax: return "softmax";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::ClampIdentity: return "clamp";
  }
  return "?";
}

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::CE: return "ce";
    case LossKind::BCE: return "bce";
    case LossKind::MSE: return "mse";
    case LossKind::WD: return "wd";
    case LossKind::NLAE: return "nlae";
    case LossKind::MSEwo: return "mse_wo";
  }
  return "?";
}

inline LossKind parse_loss(std::string_view s) {
  for (LossKind k : {LossKind::CE, LossKind::BCE, LossKind::MSE, LossKind::WD, LossKind::NLAE,
                     LossKind::MSEwo}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown loss '" + std::string(s) + "'");
}

inline Activation parse_activation(std::string_view s) {
  for (Activation a : {Activation::Softmax, Activation::Sigmoid, Activation::ClampIdentity}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

/// CE and WD only make sense for labels that are probability distributions.
inline bool requires_unit_sum(LossKind k) { return k == LossKind::CE || k == LossKind::WD; }

/// The activation a loss is evaluated through when none is given explicitly.
inline Activation default_activation(LossKind k) {
  return k == LossKind::MSEwo ? Activation::ClampIdentity : Activation::Softmax;
}

struct LossResult {
  double value = 0.0;
  std::vector<double> grad_wrt_logits;
};

inline constexpr double kLogFloor = 1e-12;

// ---------------------------------------------------------------------------
// Activations

inline std::vector<double> activate(Activation kind, std::span<const double> kappa) {
  std::vector<double> out(kappa.size());
  switch (kind) {
    case Activation::Softmax: {
      if (kappa.empty()) return out;
      const double mx = *std::max_element(kappa.begin(), kappa.end());
      double total = 0.0;
      for (std::size_t i = 0; i < kappa.size(); ++i) {
        out[i] = std::exp(kappa[i] - mx);
        total += out[i];
      }
      for (double& v : out) v /= total;
      break;
    }
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < kappa.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-kappa[i]));
      break;
    case Activation::ClampIdentity:
      for (std::size_t i = 0; i < kappa.size(); ++i) out[i] = std::clamp(kappa[i], 0.0, 1.0);
      break;
  }
  return out;
}

namespace detail {

// Pulls dL/dy_hat back to dL/dkappa through the activation.
inline std::vector<double> chain_activation(Activation kind, std::span<const double> y_hat,
                                            std::vector<double> g) {
  switch (kind) {
    case Activation::Softmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y_hat[i];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = y_hat[i] * (g[i] - dot);
      break;
    }
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y_hat[i] * (1.0 - y_hat[i]);
      break;
    case Activation::ClampIdentity:
      throw ConfigError("clamp activation is decode-only and cannot be used inside a loss");
  }
  return g;
}

inline void check_sizes(std::span<const double> y, std::span<const double> kappa) {
  if (y.size() != kappa.size() || y.empty()) {
    throw DomainError("label has " + std::to_string(y.size()) + " entries, logits " +
                      std::to_string(kappa.size()));
  }
}

inline void check_unit_sum(std::span<const double> y, std::string_view loss) {
  const double total = std::accumulate(y.begin(), y.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) {
    throw IncompatibleEncodingError(std::string(loss) +
                                    " needs a label whose components sum to 1 (got " +
                                    std::to_string(total) + ")");
  }
}

inline void check_probabilistic(Activation kind, std::string_view loss) {
  if (kind == Activation::ClampIdentity) {
    throw ConfigError(std::string(loss) + " needs a softmax or sigmoid activation");
  }
}

// log(max(x, floor)) and its derivative.
inline double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }
inline double safe_log_slope(double x) { return x > kLogFloor ? 1.0 / x : 0.0; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Losses

/// Cross entropy through softmax. Gradient is softmax(kappa) - y.
inline LossResult loss_ce(std::span<const double> y, std::span<const double> kappa) {
  detail::check_sizes(y, kappa);
  detail::check_unit_sum(y, "ce");
  const auto y_hat = activate(Activation::Softmax, kappa);
  LossResult r;
  r.grad_wrt_logits.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0) r.value -= y[i] * detail::safe_log(y_hat[i]);
    r.grad_wrt_logits[i] = y_hat[i] - y[i];
  }
  return r;
}

inline LossResult loss_bce(std::span<const double> y, std::span<const double> kappa,
                           Activation kind) {
  detail::check_sizes(y, kappa);
  detail::check_probabilistic(kind, "bce");
  const auto y_hat = activate(kind, kappa);
  LossResult r;
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = 1.0 - y_hat[i];
    r.value -= y[i] * detail::safe_log(y_hat[i]) + (1.0 - y[i]) * detail::safe_log(q);
    g[i] = -y[i] * detail::safe_log_slope(y_hat[i]) + (1.0 - y[i]) * detail::safe_log_slope(q);
  }
  r.grad_wrt_logits = detail::chain_activation(kind, y_hat, std::move(g));
  return r;
}

inline LossResult loss_mse(std::span<const double> y, std::span<const double> kappa,
                           Activation kind) {
  detail::check_sizes(y, kappa);
  detail::check_probabilistic(kind, "mse");
  const auto y_hat = activate(kind, kappa);
  LossResult r;
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y_hat[i] - y[i];
    r.value += d * d;
    g[i] = 2.0 * d;
  }
  r.grad_wrt_logits = detail::chain_activation(kind, y_hat, std::move(g));
  return r;
}

/// Negative log absolute error, -sum log(1 - |y - y_hat|).
inline LossResult loss_nlae(std::span<const double> y, std::span<const double> kappa,
                            Activation kind) {
  detail::check_sizes(y, kappa);
  detail::check_probabilistic(kind, "nlae");
  const auto y_hat = activate(kind, kappa);
  LossResult r;
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y_hat[i] - y[i];
    // 1 - |d| grouped so that binary y reproduces BCE's log arguments exactly:
    // y = 1 gives y_hat, y = 0 gives 1 - y_hat.
    const double closeness = d >= 0.0 ? (1.0 - y_hat[i]) + y[i] : (1.0 - y[i]) + y_hat[i];
    r.value -= detail::safe_log(closeness);
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    g[i] = sign * detail::safe_log_slope(closeness);
  }
  r.grad_wrt_logits = detail::chain_activation(kind, y_hat, std::move(g));
  return r;
}

/// Squared error on the raw logits; no activation.
inline LossResult loss_mse_wo(std::span<const double> y, std::span<const double> kappa) {
  detail::check_sizes(y, kappa);
  LossResult r;
  r.grad_wrt_logits.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = kappa[i] - y[i];
    r.value += d * d;
    r.grad_wrt_logits[i] = 2.0 * d;
  }
  return r;
}

/// Wasserstein (Mallows) distance between y and softmax(kappa).
inline LossResult loss_wd(std::span<const double> y, std::span<const double> kappa) {
  detail::check_sizes(y, kappa);
  detail::check_unit_sum(y, "wd");
  const auto y_hat = activate(Activation::Softmax, kappa);
  const std::size_t n = y.size();
  std::vector<double> sign(n);
  LossResult r;
  double cdf_y = 0.0;
  double cdf_hat = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cdf_y += y[i];
    cdf_hat += y_hat[i];
    const double diff = cdf_hat - cdf_y;
    r.value += std::abs(diff);
    sign[i] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  }
  // dL/dy_hat_j = sum_{i >= j} sign_i
  std::vector<double> g(n);
  double tail = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    tail += sign[j];
    g[j] = tail;
  }
  r.grad_wrt_logits = detail::chain_activation(Activation::Softmax, y_hat, std::move(g));
  return r;
}

/// Dispatch by selector. `kind` is ignored by CE, WD and MSE(wo), which have
/// fixed pairings.
inline LossResult evaluate_loss(LossKind loss, Activation kind, std::span<const double> y,
                                std::span<const double> kappa) {
  switch (loss) {
    case LossKind::CE: return loss_ce(y, kappa);
    case LossKind::BCE: return loss_bce(y, kappa, kind);
    case LossKind::MSE: return loss_mse(y, kappa, kind);
    case LossKind::WD: return loss_wd(y, kappa);
    case LossKind::NLAE: return loss_nlae(y, kappa, kind);
    case LossKind::MSEwo: return loss_mse_wo(y, kappa);
  }
  throw ConfigError("unknown loss");
}

/// alpha * base(ULD(p)) + (1 - alpha) * base(GLC(p, sigma)).
inline LossResult loss_combined(double alpha, const OutputSpace& space, double p,
                                std::span<const double> kappa, LossKind base, Activation kind,
                                double sigma_glc) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  if (alpha < 1.0 && requires_unit_sum(base)) {
    throw IncompatibleEncodingError(std::string(to_string(base)) +
                                    " cannot be combined with GLC labels (alpha < 1)");
  }
  LossResult r;
  r.grad_wrt_logits.assign(kappa.size(), 0.0);
  auto accumulate_term = [&](double w, const LabelDistribution& y) {
    if (w == 0.0) return;
    const LossResult part = evaluate_loss(base, kind, y.view(), kappa);
    r.value += w * part.value;
    for (std::size_t i = 0; i < kappa.size(); ++i) r.grad_wrt_logits[i] += w * part.grad_wrt_logits[i];
  };
  accumulate_term(alpha, encode_uld(space, p));
  accumulate_term(1.0 - alpha, encode_glc(space, p, sigma_glc));
  return r;
}

/// Sort multi-source targets ascending so head h always tracks the h-th
/// smallest DOA.
inline std::vector<double> align_ascending(std::vector<double> targets) {
  if (targets.empty()) throw DomainError("align_ascending: no targets");
  std::stable_sort(targets.begin(), targets.end());
  return targets;
}

}  // namespace doa
