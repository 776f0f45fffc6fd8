// SPDX-License-Identifier: Apache-2.0
//
// Plain `key = value` experiment configuration files. `#` starts a comment.
#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doa/errors.hpp"
#include "doa/eval.hpp"

namespace doa {

struct ConfigEntry {
  std::string value;
  std::string origin;  // "file:line" or "override"
};

using ConfigDoc = std::map<std::string, ConfigEntry>;

namespace detail {

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& item : split(s, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Parses `key = value` lines; errors carry `source:line`.
inline ConfigDoc parse_config_text(const std::string& text, const std::string& source) {
  ConfigDoc doc;
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(n);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (doc.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    doc[key] = {value, where};
  }
  return doc;
}

inline ConfigDoc load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

/// Applies `key=value` strings on top of `doc`.
inline void apply_overrides(ConfigDoc& doc, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    doc[detail::trim(o.substr(0, eq))] = {detail::trim(o.substr(eq + 1)), "override '" + o + "'"};
  }
}

/// Settings that only matter to the command line front end.
struct RunOptions {
  std::vector<double> sweep_cell_deg = {45.0, 20.0, 10.0};
  std::string checkpoint;  // empty: <out_dir>/checkpoint.json
  std::vector<LabelEncoding> grid_encodings;
  std::vector<LossKind> grid_losses;
};

/// Applies every recognised key; unknown keys and bad values raise with the
/// entry's origin.
inline void apply_config(const ConfigDoc& doc, ExperimentConfig& cfg, RunOptions& run) {
  std::size_t freq_count = cfg.data.freq_bins.size();
  double freq_lo = cfg.data.freq_bins.front();
  double freq_hi = cfg.data.freq_bins.back();
  bool freq_touched = false;
  double range = cfg.space.range_deg();
  double cell = cfg.space.cell_deg();

  for (const auto& [key, entry] : doc) {
    const std::string& v = entry.value;
    try {
      auto as_size = [&] {
        const long long x = std::stoll(v);
        if (x < 0) throw ConfigError("must be non-negative");
        return static_cast<std::size_t>(x);
      };
      if (key == "encoding") {
        const auto list = detail::split_list(v);
        run.grid_encodings.clear();
        for (const auto& e : list) run.grid_encodings.push_back(parse_encoding(e));
        if (list.size() == 1) cfg.encoding = run.grid_encodings.front();
      } else if (key == "loss") {
        const auto list = detail::split_list(v);
        run.grid_losses.clear();
        for (const auto& l : list) run.grid_losses.push_back(parse_loss(l));
        if (list.size() == 1) {
          cfg.loss = run.grid_losses.front();
          if (!doc.count("activation")) cfg.activation = default_activation(cfg.loss);
        }
      } else if (key == "activation") {
        cfg.activation = parse_activation(v);
      } else if (key == "decoding") {
        cfg.decoders.clear();
        for (const auto& d : detail::split_list(v)) cfg.decoders.push_back(parse_decoder(d));
      } else if (key == "range_deg") {
        range = std::stod(v);
      } else if (key == "cell_deg") {
        const auto list = detail::split_list(v);
        if (list.size() == 1) {
          cell = std::stod(list.front());
        } else {
          run.sweep_cell_deg.clear();
          for (const auto& x : list) run.sweep_cell_deg.push_back(std::stod(x));
        }
      } else if (key == "sweep_cell_deg") {
        run.sweep_cell_deg.clear();
        for (const auto& x : detail::split_list(v)) run.sweep_cell_deg.push_back(std::stod(x));
      } else if (key == "glc_sigma") {
        cfg.glc_sigma = std::stod(v);
      } else if (key == "alpha") {
        cfg.alpha = std::stod(v);
      } else if (key == "num_sources") {
        cfg.data.num_sources = as_size();
      } else if (key == "array") {
        cfg.data.array = parse_array_kind(v);
      } else if (key == "count") {
        cfg.data.count = as_size();
        const std::size_t tenth = std::max<std::size_t>(1, cfg.data.count / 10);
        if (!doc.count("validation_count")) cfg.data.validation_count = tenth;
        if (!doc.count("test_count")) cfg.data.test_count = tenth;
      } else if (key == "validation_count") {
        cfg.data.validation_count = as_size();
      } else if (key == "test_count") {
        cfg.data.test_count = as_size();
      } else if (key == "snr_lo_db") {
        cfg.data.snr_lo_db = std::stod(v);
      } else if (key == "snr_hi_db") {
        cfg.data.snr_hi_db = std::stod(v);
      } else if (key == "freq_bins") {
        freq_count = as_size();
        freq_touched = true;
      } else if (key == "freq_lo_hz") {
        freq_lo = std::stod(v);
        freq_touched = true;
      } else if (key == "freq_hi_hz") {
        freq_hi = std::stod(v);
        freq_touched = true;
      } else if (key == "batch_size") {
        cfg.train.batch_size = as_size();
      } else if (key == "max_epochs") {
        cfg.train.max_epochs = as_size();
      } else if (key == "lr_init") {
        cfg.train.lr_init = std::stod(v);
      } else if (key == "lr_reduced") {
        cfg.train.lr_reduced = std::stod(v);
      } else if (key == "plateau_patience") {
        cfg.train.plateau_patience = as_size();
      } else if (key == "early_stop_patience") {
        cfg.train.early_stop_patience = as_size();
      } else if (key == "weight_decay") {
        cfg.train.weight_decay = std::stod(v);
      } else if (key == "hidden") {
        cfg.train.hidden.clear();
        for (const auto& h : detail::split_list(v)) cfg.train.hidden.push_back(std::stoul(h));
      } else if (key == "seed") {
        const auto s = std::stoull(v);
        cfg.train.seed = s;
        cfg.data.seed = s;
      } else if (key == "checkpoint") {
        run.checkpoint = v;
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError(entry.origin + ": bad value '" + v + "' for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw ConfigError(entry.origin + ": value out of range for '" + key + "'");
    } catch (const Error& e) {
      throw ConfigError(entry.origin + ": " + e.what());
    }
  }
  if (freq_touched) cfg.data.freq_bins = linear_freq_bins(freq_count, freq_lo, freq_hi);
  try {
    cfg.space = OutputSpace(range, cell);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace doa
