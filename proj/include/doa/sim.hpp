// SPDX-License-Identifier: Apache-2.0
//
// Free-field far-field simulator producing inter-microphone phase features.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "doa/errors.hpp"
#include "doa/label_codec.hpp"

namespace doa {

inline constexpr double kSpeedOfSound = 343.0;  // m/s

enum class ArrayKind { Linear, Circular };

inline std::string_view to_string(ArrayKind k) {
  return k == ArrayKind::Linear ? "linear" : "circular";
}

inline ArrayKind parse_array_kind(std::string_view s) {
  if (s == "linear") return ArrayKind::Linear;
  if (s == "circular") return ArrayKind::Circular;
  throw ConfigError("unknown array kind '" + std::string(s) + "'");
}

struct MicPosition {
  double x = 0.0;
  double y = 0.0;
};

struct ArrayGeometry {
  std::vector<MicPosition> mics;
  ArrayKind kind = ArrayKind::Linear;

  /// Evenly spaced along x, centred on the origin.
  static ArrayGeometry linear(std::size_t count = 4, double aperture_m = 0.08) {
    if (count < 2) throw DomainError("array needs at least 2 microphones");
    ArrayGeometry g;
    g.kind = ArrayKind::Linear;
    for (std::size_t m = 0; m < count; ++m) {
      const double t = static_cast<double>(m) / static_cast<double>(count - 1);
      g.mics.push_back({-aperture_m / 2.0 + t * aperture_m, 0.0});
    }
    return g;
  }

  static ArrayGeometry circular(std::size_t count = 4, double radius_m = 0.05,
                                double rotation_deg = 0.0) {
    if (count < 2) throw DomainError("array needs at least 2 microphones");
    ArrayGeometry g;
    g.kind = ArrayKind::Circular;
    for (std::size_t m = 0; m < count; ++m) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(m) /
                           static_cast<double>(count) +
                       rotation_deg * std::numbers::pi / 180.0;
      g.mics.push_back({radius_m * std::cos(a), radius_m * std::sin(a)});
    }
    return g;
  }

  static ArrayGeometry make_default(ArrayKind kind) {
    return kind == ArrayKind::Linear ? linear() : circular();
  }

  std::size_t num_pairs() const { return mics.size() * (mics.size() - 1) / 2; }
};

/// Plane-wave arrival delay at each microphone relative to the origin.
inline std::vector<double> steering_delays(const ArrayGeometry& geom, double doa_deg) {
  const bool ok = geom.kind == ArrayKind::Linear ? (doa_deg >= 0.0 && doa_deg <= 180.0)
                                                 : (doa_deg >= 0.0 && doa_deg < 360.0);
  if (!ok) throw DomainError("doa " + std::to_string(doa_deg) + " outside the array's range");
  const double theta = doa_deg * std::numbers::pi / 180.0;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  std::vector<double> tau;
  tau.reserve(geom.mics.size());
  for (const auto& m : geom.mics) tau.push_back((m.x * ct + m.y * st) / kSpeedOfSound);
  return tau;
}

/// `count` frequencies evenly spaced over [lo, hi] Hz.
inline std::vector<double> linear_freq_bins(std::size_t count = 32, double lo_hz = 300.0,
                                            double hi_hz = 8000.0) {
  std::vector<double> f(count);
  for (std::size_t i = 0; i < count; ++i) {
    f[i] = count == 1 ? lo_hz
                      : lo_hz + (hi_hz - lo_hz) * static_cast<double>(i) /
                                    static_cast<double>(count - 1);
  }
  return f;
}

inline std::size_t feature_dim(const ArrayGeometry& geom, std::size_t num_bins) {
  return 2 * geom.num_pairs() * num_bins;
}

/// Per (pair, bin): [sin phi, cos phi] with phi = 2 pi f (tau_a - tau_b),
/// averaged over sources, plus white noise. Each (sin, cos) pair carries unit
/// signal power and noise power 10^(-snr/10). Output clipped to [-2, 2].
template <class Rng>
std::vector<double> make_features(const ArrayGeometry& geom, std::span<const double> doas_deg,
                                  double snr_db, std::span<const double> freq_bins, Rng& rng) {
  for (double f : freq_bins) {
    if (!(f > 0.0 && f <= 8000.0)) throw DomainError("frequency bins must lie in (0, 8000] Hz");
  }
  const std::size_t n_mics = geom.mics.size();
  std::vector<double> out(feature_dim(geom, freq_bins.size()), 0.0);
  const double weight = 1.0 / static_cast<double>(doas_deg.size());
  for (double doa : doas_deg) {
    const auto tau = steering_delays(geom, doa);
    std::size_t o = 0;
    for (std::size_t a = 0; a < n_mics; ++a) {
      for (std::size_t b = a + 1; b < n_mics; ++b) {
        for (double f : freq_bins) {
          const double phi = 2.0 * std::numbers::pi * f * (tau[a] - tau[b]);
          out[o++] += weight * std::sin(phi);
          out[o++] += weight * std::cos(phi);
        }
      }
    }
  }
  const double noise_sd = std::sqrt(0.5 * std::pow(10.0, -snr_db / 10.0));
  if (noise_sd > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_sd);
    for (double& v : out) v += noise(rng);
  }
  for (double& v : out) v = std::clamp(v, -2.0, 2.0);
  return out;
}

template <class Rng>
std::vector<double> make_features(const ArrayGeometry& geom, double doa_deg, double snr_db,
                                  std::span<const double> freq_bins, Rng& rng) {
  const double doas[] = {doa_deg};
  return make_features(geom, std::span<const double>(doas), snr_db, freq_bins, rng);
}

struct SceneSample {
  std::vector<double> doas_deg;  // ascending; one entry per source
  double snr_db = 0.0;
  std::vector<double> features;

  double doa_deg() const { return doas_deg.front(); }
};

struct DatasetSpec {
  std::size_t count = 18000;            // training samples
  std::size_t validation_count = 1800;
  std::size_t test_count = 1800;
  OutputSpace space{180.0, 5.0};
  ArrayKind array = ArrayKind::Linear;
  double snr_lo_db = 10.0;
  double snr_hi_db = 20.0;
  std::vector<double> freq_bins = linear_freq_bins();
  std::uint64_t seed = 0;
  std::size_t num_sources = 1;

  void validate() const {
    if (count == 0) throw ConfigError("dataset count must be > 0");
    if (snr_lo_db > snr_hi_db) throw ConfigError("snr range must be ordered");
    if (num_sources < 1 || num_sources > 2) throw ConfigError("num_sources must be 1 or 2");
    if (freq_bins.empty()) throw ConfigError("need at least one frequency bin");
    if (array == ArrayKind::Linear && space.range_deg() > 180.0) {
      throw ConfigError("a linear array only resolves DOAs in [0, 180]");
    }
  }
};

struct Dataset {
  DatasetSpec spec;
  std::vector<SceneSample> train;
  std::vector<SceneSample> validation;
  std::vector<SceneSample> test;
};

enum class Split : std::uint64_t { Train = 0, Validation = 1, Test = 2 };

/// Deterministic per-sample generator: stream (seed, split, index).
inline SceneSample make_sample(const DatasetSpec& spec, const ArrayGeometry& geom, Split split,
                               std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> doa(0.0, spec.space.range_deg());
  std::uniform_real_distribution<double> snr(spec.snr_lo_db, spec.snr_hi_db);
  SceneSample s;
  for (std::size_t k = 0; k < spec.num_sources; ++k) s.doas_deg.push_back(doa(rng));
  std::sort(s.doas_deg.begin(), s.doas_deg.end());
  s.snr_db = spec.snr_lo_db == spec.snr_hi_db ? spec.snr_lo_db : snr(rng);
  s.features = make_features(geom, std::span<const double>(s.doas_deg), s.snr_db, spec.freq_bins, rng);
  return s;
}

inline Dataset build_dataset(const DatasetSpec& spec) {
  spec.validate();
  const ArrayGeometry geom = ArrayGeometry::make_default(spec.array);
  Dataset ds{spec, {}, {}, {}};
  auto fill = [&](std::vector<SceneSample>& out, Split split, std::size_t n) {
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(make_sample(spec, geom, split, i));
  };
  fill(ds.train, Split::Train, spec.count);
  fill(ds.validation, Split::Validation, spec.validation_count);
  fill(ds.test, Split::Test, spec.test_count);
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset files: a header line echoing the spec, then one JSON record per line.

inline nlohmann::json to_json(const DatasetSpec& s) {
  return {{"count", s.count},
          {"validation_count", s.validation_count},
          {"test_count", s.test_count},
          {"range_deg", s.space.range_deg()},
          {"cell_deg", s.space.cell_deg()},
          {"array", to_string(s.array)},
          {"snr_lo_db", s.snr_lo_db},
          {"snr_hi_db", s.snr_hi_db},
          {"freq_bins", s.freq_bins},
          {"seed", s.seed},
          {"num_sources", s.num_sources}};
}

inline DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
  DatasetSpec s;
  s.count = j.at("count").get<std::size_t>();
  s.validation_count = j.at("validation_count").get<std::size_t>();
  s.test_count = j.at("test_count").get<std::size_t>();
  s.space = OutputSpace(j.at("range_deg").get<double>(), j.at("cell_deg").get<double>());
  s.array = parse_array_kind(j.at("array").get<std::string>());
  s.snr_lo_db = j.at("snr_lo_db").get<double>();
  s.snr_hi_db = j.at("snr_hi_db").get<double>();
  s.freq_bins = j.at("freq_bins").get<std::vector<double>>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.num_sources = j.at("num_sources").get<std::size_t>();
  return s;
}

inline void write_dataset_file(const std::string& path, const DatasetSpec& spec, Split split,
                               std::span<const SceneSample> samples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  static constexpr const char* kSplitNames[] = {"train", "validation", "test"};
  nlohmann::json header = {{"spec", to_json(spec)},
                           {"split", kSplitNames[static_cast<int>(split)]},
                           {"records", samples.size()}};
  out << header.dump() << '\n';
  for (const auto& s : samples) {
    nlohmann::json rec;
    if (s.doas_deg.size() == 1) {
      rec["doa_deg"] = s.doas_deg.front();
    } else {
      rec["doa_deg"] = s.doas_deg;
    }
    rec["snr_db"] = s.snr_db;
    rec["features"] = s.features;
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Returns the header's spec echo and the records.
inline std::pair<DatasetSpec, std::vector<SceneSample>> read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path + "' is empty");
  std::pair<DatasetSpec, std::vector<SceneSample>> out;
  std::size_t line_no = 1;
  try {
    out.first = dataset_spec_from_json(nlohmann::json::parse(line).at("spec"));
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      SceneSample s;
      const auto& doa = rec.at("doa_deg");
      s.doas_deg = doa.is_array() ? doa.get<std::vector<double>>()
                                  : std::vector<double>{doa.get<double>()};
      s.snr_db = rec.at("snr_db").get<double>();
      s.features = rec.at("features").get<std::vector<double>>();
      out.second.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
  }
  return out;
}

}  // namespace doa
