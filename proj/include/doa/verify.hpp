// SPDX-License-Identifier: Apache-2.0
//
// Self-checks of the label codec and loss identities, run by `doa_arch verify`.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doa/eval.hpp"
#include "doa/label_codec.hpp"
#include "doa/losses.hpp"

namespace doa {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Mean |gamma - round(gamma)| over uniform gamma in [0, 36]; expectation 1/4.
/// Tolerance is 0.002 at 10^6 samples, widened for smaller runs.
inline CheckResult check_quantization_expectation(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 36.0);
  double total = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double g = u(rng);
    total += std::abs(g - static_cast<double>(round_class(g)));
  }
  const double mean = total / static_cast<double>(samples);
  const double tol = std::max(0.002, 5.0 * 0.1443 / std::sqrt(static_cast<double>(samples)));
  std::ostringstream os;
  os << "mean=" << mean << " expected=0.25 tol=" << tol << " n=" << samples;
  return {"quantization_error_expectation", std::abs(mean - 0.25) <= tol, os.str()};
}

/// Max |WAD(ULD(p)) - p| over random p for 180- and 360-degree spaces.
inline CheckResult check_uld_roundtrip(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  double worst = 0.0;
  for (const OutputSpace space : {OutputSpace(180.0, 5.0), OutputSpace(360.0, 10.0)}) {
    std::uniform_real_distribution<double> u(0.0, space.range_deg());
    for (std::size_t i = 0; i < samples; ++i) {
      const double p = u(rng);
      const auto y = encode_uld(space, p);
      worst = std::max({worst, std::abs(decode_wad2(space, y.view()).p_hat - p),
                        std::abs(decode_wad3(space, y.view()).p_hat - p)});
    }
  }
  std::ostringstream os;
  os << "max_abs_err=" << worst << " n=" << samples;
  return {"uld_wad_roundtrip", worst < 1e-9, os.str()};
}

/// NLAE and BCE agree on binary labels.
inline CheckResult check_nlae_bce_binary(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed + 3);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::bernoulli_distribution coin(0.3);
  double worst = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    std::vector<double> y(37);
    std::vector<double> kappa(37);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = coin(rng) ? 1.0 : 0.0;
      kappa[i] = n01(rng);
    }
    for (Activation a : {Activation::Softmax, Activation::Sigmoid}) {
      worst = std::max(worst, std::abs(loss_nlae(y, kappa, a).value - loss_bce(y, kappa, a).value));
    }
  }
  std::ostringstream os;
  os << "max_abs_diff=" << worst << " n=" << samples;
  return {"nlae_equals_bce_on_binary_labels", worst < 1e-12, os.str()};
}

inline double log_complement_sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s -= std::log(1.0 - x);
  return s;
}

/// -sum log(1 - y_i) subject to sum y_i = c is smallest at y_i = c / n.
inline CheckResult check_equal_split_minimum(double c, std::size_t n, std::size_t probes,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed + 7);
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  const std::vector<double> equal(n, c / static_cast<double>(n));
  const double at_equal = log_complement_sum(equal);
  std::size_t violations = 0;
  for (std::size_t k = 0; k < probes; ++k) {
    std::vector<double> v(n);
    if (k % 2 == 0) {
      // random point of the simplex scaled to mass c
      double total = 0.0;
      for (double& x : v) total += (x = expo(rng));
      for (double& x : v) x *= c / total;
    } else {
      // small zero-sum perturbation of the equal split
      double mean = 0.0;
      for (double& x : v) mean += (x = n01(rng));
      mean /= static_cast<double>(n);
      const double scale = 0.5 * c / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = equal[i] + scale * (v[i] - mean) / 3.0;
      if (*std::min_element(v.begin(), v.end()) < 0.0) {
        --k;
        continue;
      }
    }
    if (log_complement_sum(v) < at_equal) ++violations;
  }
  std::ostringstream os;
  os << "value_at_equal=" << at_equal << " violations=" << violations << "/" << probes;
  return {"equal_split_minimises_log_complement", violations == 0, os.str()};
}

/// WD(ULD(p), one-hot(0)) = p / l and WD(one-hot(p), one-hot(0)) = round(p / l).
inline CheckResult check_wd_curve(const OutputSpace& space, double step_deg) {
  double worst_uld = 0.0;
  std::size_t staircase_misses = 0;
  const auto curve = wd_curve(space, step_deg);
  for (const auto& pt : curve) {
    const double gamma = pt.p / space.cell_deg();
    worst_uld = std::max(worst_uld, std::abs(pt.wd_uld - gamma));
    if (pt.wd_onehot != static_cast<double>(round_class(gamma))) ++staircase_misses;
  }
  std::ostringstream os;
  os << "points=" << curve.size() << " max_uld_err=" << worst_uld
     << " staircase_misses=" << staircase_misses;
  return {"wasserstein_curves", worst_uld < 1e-9 && staircase_misses == 0, os.str()};
}

struct VerifyOptions {
  std::size_t samples = 1'000'000;  // quantization Monte Carlo
  std::size_t roundtrip_samples = 100'000;
  std::uint64_t seed = 0;
};

inline std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt) {
  return {check_quantization_expectation(opt.samples, opt.seed),
          check_uld_roundtrip(opt.roundtrip_samples, opt.seed),
          check_nlae_bce_binary(1000, opt.seed),
          check_equal_split_minimum(0.3, 36, 1000, opt.seed),
          check_wd_curve(OutputSpace(180.0, 5.0), 0.1)};
}

}  // namespace doa
