// SPDX-License-Identifier: Apache-2.0
//
// Discretized DOA output space, label encoders (one-hot, ULD, GLC, SLD),
// peak / Top-1 / weighted-adjacent decoders and 1-D Wasserstein distance.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doa/errors.hpp"

namespace doa {

/// Nearest class index of a scaled position. Halves round up unless the
/// library is built with DOA_ROUND_HALF_DOWN.
inline long round_class(double gamma) {
#ifdef DOA_ROUND_HALF_DOWN
  return static_cast<long>(std::ceil(gamma - 0.5));
#else
  return static_cast<long>(std::floor(gamma + 0.5));
#endif
}

/// DOA range split into `num_cells` cells of width `cell_deg`; the class set
/// is {0, ..., num_cells}, so label vectors have num_cells + 1 entries.
class OutputSpace {
 public:
  OutputSpace(double range_deg, double cell_deg) : range_deg_(range_deg), cell_deg_(cell_deg) {
    if (!(range_deg > 0.0) || !(cell_deg > 0.0) || !std::isfinite(range_deg) ||
        !std::isfinite(cell_deg)) {
      throw DomainError("output space needs range_deg > 0 and cell_deg > 0");
    }
    const double ratio = range_deg / cell_deg;
    const double cells = std::round(ratio);
    if (cells < 1.0 || std::abs(cells * cell_deg - range_deg) > 1e-9 * range_deg) {
      throw DomainError("cell width " + std::to_string(cell_deg) + " does not divide range " +
                        std::to_string(range_deg));
    }
    num_cells_ = static_cast<std::size_t>(cells);
  }

  double range_deg() const { return range_deg_; }
  double cell_deg() const { return cell_deg_; }
  std::size_t num_cells() const { return num_cells_; }
  std::size_t num_classes() const { return num_cells_ + 1; }
  bool circular() const { return range_deg_ == 360.0; }

  bool operator==(const OutputSpace&) const = default;

 private:
  double range_deg_;
  double cell_deg_;
  std::size_t num_cells_ = 0;
};

/// A DOA together with its scaled coordinate gamma = p / l, clamped to [0, I].
struct Position {
  double p = 0.0;
  double gamma = 0.0;

  static Position make(const OutputSpace& space, double p) {
    if (!(p >= 0.0 && p <= space.range_deg())) {
      throw DomainError("position " + std::to_string(p) + " outside [0, " +
                        std::to_string(space.range_deg()) + "]");
    }
    const double gamma =
        std::clamp(p / space.cell_deg(), 0.0, static_cast<double>(space.num_cells()));
    return {p, gamma};
  }

  long integer_part() const { return static_cast<long>(std::floor(gamma)); }
  double decimal_part() const { return gamma - std::floor(gamma); }
};

enum class EncodingKind { OneHot, ULD, GLC, SLD };

inline std::string_view to_string(EncodingKind k) {
  switch (k) {
    case EncodingKind::OneHot: return "one_hot";
    case EncodingKind::ULD: return "uld";
    case EncodingKind::GLC: return "glc";
    case EncodingKind::SLD: return "sld";
  }
  return "?";
}

/// True for encodings whose components sum to 1.
inline bool sums_to_one(EncodingKind k) { return k != EncodingKind::GLC; }

struct LabelDistribution {
  std::vector<double> values;
  EncodingKind kind = EncodingKind::OneHot;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> view() const { return values; }
};

enum class DecodeMethod { Top1, WAD2, WAD3 };

inline std::string_view to_string(DecodeMethod m) {
  switch (m) {
    case DecodeMethod::Top1: return "top1";
    case DecodeMethod::WAD2: return "wad2";
    case DecodeMethod::WAD3: return "wad3";
  }
  return "?";
}

struct DecodedPosition {
  double p_hat = 0.0;
  DecodeMethod method = DecodeMethod::Top1;
};

// ---------------------------------------------------------------------------
// Encoders

inline LabelDistribution encode_one_hot(const OutputSpace& space, double p) {
  const Position pos = Position::make(space, p);
  LabelDistribution out{std::vector<double>(space.num_classes(), 0.0), EncodingKind::OneHot};
  const long k = std::min<long>(round_class(pos.gamma), static_cast<long>(space.num_cells()));
  out.values[static_cast<std::size_t>(k)] = 1.0;
  return out;
}

/// Unbiased label distribution: mass 1 - deci(gamma) on int(gamma) and
/// deci(gamma) on int(gamma) + 1, so the class-weighted mean is exactly gamma.
inline LabelDistribution encode_uld(const OutputSpace& space, double p) {
  const Position pos = Position::make(space, p);
  LabelDistribution out{std::vector<double>(space.num_classes(), 0.0), EncodingKind::ULD};
  const auto k = static_cast<std::size_t>(pos.integer_part());
  const double frac = pos.decimal_part();
  out.values[k] = 1.0 - frac;
  if (frac > 0.0) out.values[k + 1] = frac;
  return out;
}

namespace detail {
inline std::vector<double> gaussian_kernel(const OutputSpace& space, double p, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("label sigma must be > 0");
  Position::make(space, p);
  std::vector<double> v(space.num_classes());
  const double two_var = 2.0 * sigma * sigma;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = static_cast<double>(i) * space.cell_deg() - p;
    v[i] = std::exp(-d * d / two_var);
  }
  return v;
}
}  // namespace detail

/// Gaussian label coding; peak <= 1, not normalized. sigma in degrees.
inline LabelDistribution encode_glc(const OutputSpace& space, double p, double sigma) {
  return {detail::gaussian_kernel(space, p, sigma), EncodingKind::GLC};
}

/// Soft label distribution: the GLC kernel normalized to unit sum.
inline LabelDistribution encode_sld(const OutputSpace& space, double p, double sigma) {
  auto v = detail::gaussian_kernel(space, p, sigma);
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= total;
  return {std::move(v), EncodingKind::SLD};
}

// ---------------------------------------------------------------------------
// Decoders

/// Argmax; ties go to the lowest index.
inline std::size_t peak_class(std::span<const double> dist) {
  if (dist.empty()) throw DomainError("peak_class of an empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[best]) best = i;
  }
  return best;
}

inline std::size_t peak_class(const LabelDistribution& d) { return peak_class(d.view()); }

namespace detail {
inline void check_length(const OutputSpace& space, std::span<const double> dist) {
  if (dist.size() != space.num_classes()) {
    throw DomainError("distribution has " + std::to_string(dist.size()) + " entries, expected " +
                      std::to_string(space.num_classes()));
  }
}

// Reads dist with one zero of padding on either side.
inline double padded(std::span<const double> dist, long i) {
  if (i < 0 || i >= static_cast<long>(dist.size())) return 0.0;
  return dist[static_cast<std::size_t>(i)];
}

inline double weighted_centre(const OutputSpace& space, std::span<const double> dist,
                              std::span<const long> classes) {
  double num = 0.0;
  double den = 0.0;
  for (long c : classes) {
    const double w = padded(dist, c);
    num += w * static_cast<double>(c) * space.cell_deg();
    den += w;
  }
  if (den == 0.0) throw DegenerateInputError("weighted adjacent decoding: zero total weight");
  return num / den;
}
}  // namespace detail

inline DecodedPosition decode_top1(const OutputSpace& space, std::span<const double> dist) {
  detail::check_length(space, dist);
  return {static_cast<double>(peak_class(dist)) * space.cell_deg(), DecodeMethod::Top1};
}

/// Peak class plus its higher neighbour (right neighbour on ties).
inline DecodedPosition decode_wad2(const OutputSpace& space, std::span<const double> dist) {
  detail::check_length(space, dist);
  const long k = static_cast<long>(peak_class(dist));
  const long hi = detail::padded(dist, k - 1) > detail::padded(dist, k + 1) ? k - 1 : k + 1;
  const long classes[] = {k, hi};
  return {detail::weighted_centre(space, dist, classes), DecodeMethod::WAD2};
}

/// Peak class plus both neighbours.
inline DecodedPosition decode_wad3(const OutputSpace& space, std::span<const double> dist) {
  detail::check_length(space, dist);
  const long k = static_cast<long>(peak_class(dist));
  const long classes[] = {k - 1, k, k + 1};
  return {detail::weighted_centre(space, dist, classes), DecodeMethod::WAD3};
}

inline DecodedPosition decode(DecodeMethod method, const OutputSpace& space,
                              std::span<const double> dist) {
  switch (method) {
    case DecodeMethod::Top1: return decode_top1(space, dist);
    case DecodeMethod::WAD2: return decode_wad2(space, dist);
    case DecodeMethod::WAD3: return decode_wad3(space, dist);
  }
  throw DomainError("unknown decode method");
}

// ---------------------------------------------------------------------------
// Distances and limits

/// Earth mover's distance between two unit-mass histograms on the class
/// grid, in class units: sum_i |CDF_a(i) - CDF_b(i)|.
inline double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("wasserstein_1d: length mismatch");
  const double mass_a = std::accumulate(a.begin(), a.end(), 0.0);
  const double mass_b = std::accumulate(b.begin(), b.end(), 0.0);
  if (std::abs(mass_a - 1.0) > 1e-6 || std::abs(mass_b - 1.0) > 1e-6) {
    throw DomainError("wasserstein_1d: inputs must have unit mass");
  }
  double cdf_a = 0.0;
  double cdf_b = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cdf_a += a[i];
    cdf_b += b[i];
    total += std::abs(cdf_a - cdf_b);
  }
  return total;
}

inline double wasserstein_1d(const LabelDistribution& a, const LabelDistribution& b) {
  return wasserstein_1d(a.view(), b.view());
}

/// Mean |p - round(p / l) * l|: the error a perfect classifier incurs under
/// Top-1 decoding.
inline double quantization_error_limit(std::span<const double> positions,
                                       const OutputSpace& space) {
  if (positions.empty()) throw DomainError("quantization_error_limit: no positions");
  double total = 0.0;
  for (double p : positions) {
    const Position pos = Position::make(space, p);
    total += std::abs(p - static_cast<double>(round_class(pos.gamma)) * space.cell_deg());
  }
  return total / static_cast<double>(positions.size());
}

}  // namespace doa
