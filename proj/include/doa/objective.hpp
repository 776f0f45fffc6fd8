// SPDX-License-Identifier: Apache-2.0
//
// Binds a label encoding, a loss and an output activation into the per-sample
// training objective, for one or more output heads.
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doa/errors.hpp"
#include "doa/label_codec.hpp"
#include "doa/losses.hpp"

namespace doa {

/// Label encoding selector; UldGlc is the alpha-weighted ULD + GLC pair.
enum class LabelEncoding { OneHot, ULD, GLC, SLD, UldGlc };

inline std::string_view to_string(LabelEncoding e) {
  switch (e) {
    case LabelEncoding::OneHot: return "one_hot";
    case LabelEncoding::ULD: return "uld";
    case LabelEncoding::GLC: return "glc";
    case LabelEncoding::SLD: return "sld";
    case LabelEncoding::UldGlc: return "uld_glc";
  }
  return "?";
}

inline LabelEncoding parse_encoding(std::string_view s) {
  for (LabelEncoding e : {LabelEncoding::OneHot, LabelEncoding::ULD, LabelEncoding::GLC,
                          LabelEncoding::SLD, LabelEncoding::UldGlc}) {
    if (s == to_string(e)) return e;
  }
  throw ConfigError("unknown encoding '" + std::string(s) + "'");
}

struct Objective {
  LabelEncoding encoding = LabelEncoding::ULD;
  LossKind loss = LossKind::NLAE;
  Activation activation = Activation::Softmax;
  OutputSpace space{180.0, 5.0};
  double glc_sigma = 8.0;
  double alpha = 0.2;
  std::size_t num_sources = 1;

  std::size_t head_size() const { return space.num_classes(); }
  std::size_t output_dim() const { return head_size() * num_sources; }

  /// Whether the encoding/loss pairing is usable; CE and WD need unit-sum labels.
  bool compatible() const {
    if (!requires_unit_sum(loss)) return true;
    if (encoding == LabelEncoding::GLC) return false;
    return !(encoding == LabelEncoding::UldGlc && alpha < 1.0);
  }

  void validate() const {
    if (!compatible()) {
      throw ConfigError("loss '" + std::string(to_string(loss)) + "' is incompatible with encoding '" +
                        std::string(to_string(encoding)) + "'");
    }
    if (loss == LossKind::MSEwo && activation != Activation::ClampIdentity) {
      throw ConfigError("mse_wo is paired with the clamp activation");
    }
    if (loss != LossKind::MSEwo && activation == Activation::ClampIdentity) {
      throw ConfigError("clamp activation is only valid with mse_wo");
    }
    if ((loss == LossKind::CE || loss == LossKind::WD) && activation != Activation::Softmax) {
      throw ConfigError("ce and wd are paired with softmax");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (!(glc_sigma > 0.0)) throw ConfigError("glc_sigma must be > 0");
    if (num_sources < 1) throw ConfigError("num_sources must be >= 1");
  }

  LabelDistribution encode(double p) const {
    switch (encoding) {
      case LabelEncoding::OneHot: return encode_one_hot(space, p);
      case LabelEncoding::ULD: return encode_uld(space, p);
      case LabelEncoding::GLC: return encode_glc(space, p, glc_sigma);
      case LabelEncoding::SLD: return encode_sld(space, p, glc_sigma);
      case LabelEncoding::UldGlc: break;
    }
    throw ConfigError("uld_glc has no single label vector");
  }

  LossResult head_loss(std::span<const double> kappa, double p) const {
    if (encoding == LabelEncoding::UldGlc) {
      return loss_combined(alpha, space, p, kappa, loss, activation, glc_sigma);
    }
    const LabelDistribution y = encode(p);
    return evaluate_loss(loss, activation, y.view(), kappa);
  }

  /// Sum of per-head losses against ascending-sorted targets.
  LossResult evaluate(std::span<const double> kappa, std::span<const double> doas) const {
    if (doas.size() != num_sources || kappa.size() != output_dim()) {
      throw DomainError("objective: head/target count mismatch");
    }
    const auto targets = align_ascending({doas.begin(), doas.end()});
    LossResult total;
    total.grad_wrt_logits.assign(kappa.size(), 0.0);
    const std::size_t n = head_size();
    for (std::size_t h = 0; h < num_sources; ++h) {
      const LossResult r = head_loss(kappa.subspan(h * n, n), targets[h]);
      total.value += r.value;
      std::copy(r.grad_wrt_logits.begin(), r.grad_wrt_logits.end(),
                total.grad_wrt_logits.begin() + static_cast<std::ptrdiff_t>(h * n));
    }
    return total;
  }

  /// Predicted distribution for one head, as used by the decoders.
  std::vector<double> predict(std::span<const double> kappa_head) const {
    return activate(activation, kappa_head);
  }
};

}  // namespace doa
