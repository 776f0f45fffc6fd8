// SPDX-License-Identifier: Apache-2.0
//
// Metrics, experiment runner, resolution sweep, encoding x loss grid and
// report files.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "doa/cancel.hpp"
#include "doa/errors.hpp"
#include "doa/label_codec.hpp"
#include "doa/losses.hpp"
#include "doa/net.hpp"
#include "doa/objective.hpp"
#include "doa/sim.hpp"

namespace doa {

// ---------------------------------------------------------------------------
// Metrics

/// Percentage of predictions whose peak class is the nearest class to the
/// true position.
template <class Dists>
double accuracy(const Dists& pred_dists, std::span<const double> true_positions,
                const OutputSpace& space) {
  if (pred_dists.size() != true_positions.size()) throw DomainError("accuracy: length mismatch");
  if (true_positions.empty()) throw DomainError("accuracy: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < true_positions.size(); ++i) {
    const Position pos = Position::make(space, true_positions[i]);
    const std::span<const double> d(pred_dists[i]);
    if (static_cast<long>(peak_class(d)) == round_class(pos.gamma)) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(true_positions.size());
}

/// Mean angular error, min(|d|, 360 - |d|) per sample.
inline double mae(std::span<const double> pred_positions, std::span<const double> true_positions) {
  if (pred_positions.size() != true_positions.size()) throw DomainError("mae: length mismatch");
  if (pred_positions.empty()) throw DomainError("mae: no samples");
  double total = 0.0;
  for (std::size_t i = 0; i < pred_positions.size(); ++i) {
    const double d = std::abs(pred_positions[i] - true_positions[i]);
    total += std::min(d, 360.0 - d);
  }
  return total / static_cast<double>(pred_positions.size());
}

// ---------------------------------------------------------------------------
// Experiment configuration and report

struct ExperimentConfig {
  LabelEncoding encoding = LabelEncoding::ULD;
  LossKind loss = LossKind::NLAE;
  Activation activation = Activation::Softmax;
  std::vector<DecodeMethod> decoders = {DecodeMethod::Top1, DecodeMethod::WAD2, DecodeMethod::WAD3};
  OutputSpace space{180.0, 5.0};
  TrainConfig train;
  DatasetSpec data;  // data.space is replaced by `space`
  double glc_sigma = 8.0;
  double alpha = 0.2;

  Objective objective() const {
    return {encoding, loss, activation, space, glc_sigma, alpha, data.num_sources};
  }

  DatasetSpec dataset_spec() const {
    DatasetSpec d = data;
    d.space = space;
    return d;
  }

  void validate() const {
    objective().validate();
    train.validate();
    dataset_spec().validate();
    if (decoders.empty()) throw ConfigError("at least one decoder is required");
  }
};

inline DecodeMethod parse_decoder(std::string_view s) {
  for (DecodeMethod m : {DecodeMethod::Top1, DecodeMethod::WAD2, DecodeMethod::WAD3}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown decoder '" + std::string(s) + "'");
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  std::vector<std::string> dec;
  for (auto m : c.decoders) dec.emplace_back(to_string(m));
  return {{"encoding", to_string(c.encoding)},
          {"loss", to_string(c.loss)},
          {"activation", to_string(c.activation)},
          {"decoding", dec},
          {"range_deg", c.space.range_deg()},
          {"cell_deg", c.space.cell_deg()},
          {"glc_sigma", c.glc_sigma},
          {"alpha", c.alpha},
          {"train",
           {{"batch_size", c.train.batch_size},
            {"max_epochs", c.train.max_epochs},
            {"lr_init", c.train.lr_init},
            {"lr_reduced", c.train.lr_reduced},
            {"plateau_patience", c.train.plateau_patience},
            {"early_stop_patience", c.train.early_stop_patience},
            {"weight_decay", c.train.weight_decay},
            {"hidden", c.train.hidden},
            {"seed", c.train.seed}}},
          {"data", to_json(c.dataset_spec())}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.encoding = parse_encoding(j.at("encoding").get<std::string>());
  c.loss = parse_loss(j.at("loss").get<std::string>());
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.decoders.clear();
  for (const auto& d : j.at("decoding")) c.decoders.push_back(parse_decoder(d.get<std::string>()));
  c.space = OutputSpace(j.at("range_deg").get<double>(), j.at("cell_deg").get<double>());
  c.glc_sigma = j.at("glc_sigma").get<double>();
  c.alpha = j.at("alpha").get<double>();
  const auto& t = j.at("train");
  c.train.batch_size = t.at("batch_size").get<std::size_t>();
  c.train.max_epochs = t.at("max_epochs").get<std::size_t>();
  c.train.lr_init = t.at("lr_init").get<double>();
  c.train.lr_reduced = t.at("lr_reduced").get<double>();
  c.train.plateau_patience = t.at("plateau_patience").get<std::size_t>();
  c.train.early_stop_patience = t.at("early_stop_patience").get<std::size_t>();
  c.train.weight_decay = t.at("weight_decay").get<double>();
  c.train.hidden = t.at("hidden").get<std::vector<std::size_t>>();
  c.train.seed = t.at("seed").get<std::uint64_t>();
  c.data = dataset_spec_from_json(j.at("data"));
  return c;
}

struct ExperimentReport {
  std::string encoding;
  std::string loss;
  std::string activation;
  double acc_percent = 0.0;
  std::map<std::string, double> mae_by_decoder;
  double qe_limit = 0.0;
  TrainHistory history;
  double runtime_s = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json config;  // resolved configuration echo

  bool operator==(const ExperimentReport&) const = default;
};

struct TestMetrics {
  double acc_percent = 0.0;
  std::map<std::string, double> mae_by_decoder;
  double qe_limit = 0.0;
};

/// Scores a trained network on `samples`. Multi-source heads are paired with
/// targets by ascending order.
inline TestMetrics evaluate_network(const Network& net, const Objective& obj,
                                    std::span<const DecodeMethod> decoders,
                                    std::span<const SceneSample> samples) {
  if (samples.empty()) throw DomainError("evaluate_network: empty test split");
  const Eigen::MatrixXd logits = forward_batch(net, feature_matrix(samples));
  const std::size_t n = obj.head_size();
  std::vector<std::vector<double>> dists;
  std::vector<double> truth;
  std::map<std::string, std::vector<double>> decoded;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const std::span<const double> kappa(logits.col(static_cast<Eigen::Index>(j)).data(), obj.output_dim());
    const auto targets = align_ascending(samples[j].doas_deg);
    std::vector<std::vector<double>> heads;
    for (std::size_t h = 0; h < obj.num_sources; ++h) heads.push_back(obj.predict(kappa.subspan(h * n, n)));
    for (std::size_t h = 0; h < obj.num_sources; ++h) {
      dists.push_back(heads[h]);
      truth.push_back(targets[h]);
    }
    for (DecodeMethod m : decoders) {
      std::vector<double> est;
      for (const auto& d : heads) est.push_back(decode(m, obj.space, d).p_hat);
      std::sort(est.begin(), est.end());
      auto& out = decoded[std::string(to_string(m))];
      out.insert(out.end(), est.begin(), est.end());
    }
  }
  TestMetrics m;
  m.acc_percent = accuracy(dists, truth, obj.space);
  for (const auto& [name, est] : decoded) m.mae_by_decoder[name] = mae(est, truth);
  m.qe_limit = quantization_error_limit(truth, obj.space);
  return m;
}

inline ExperimentReport make_report(const ExperimentConfig& cfg, const TestMetrics& m,
                                    TrainHistory history, double runtime_s) {
  ExperimentReport r;
  r.encoding = to_string(cfg.encoding);
  r.loss = to_string(cfg.loss);
  r.activation = to_string(cfg.activation);
  r.acc_percent = m.acc_percent;
  r.mae_by_decoder = m.mae_by_decoder;
  r.qe_limit = m.qe_limit;
  r.history = std::move(history);
  r.runtime_s = runtime_s;
  r.seed = cfg.train.seed;
  r.config = to_json(cfg);
  return r;
}

struct ExperimentOutcome {
  ExperimentReport report;
  Network net;
};

/// Builds the dataset, trains and evaluates. Incompatible encoding/loss
/// pairings fail before any work starts.
inline ExperimentOutcome run_experiment_full(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = build_dataset(cfg.dataset_spec());
  const Objective obj = cfg.objective();
  Network net = Network::make(data.train.front().features.size(), cfg.train.hidden, obj.output_dim(),
                              cfg.train.seed);
  TrainResult trained = train(std::move(net), data, obj, cfg.train);
  const TestMetrics m = evaluate_network(trained.net, obj, cfg.decoders, data.test);
  const double runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {make_report(cfg, m, std::move(trained.history), runtime), std::move(trained.net)};
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  return run_experiment_full(cfg).report;
}

// ---------------------------------------------------------------------------
// Resolution sweep

struct SweepRow {
  double cell_deg = 0.0;
  double expected_qe = 0.0;  // l / 4
  ExperimentReport report;
};

inline std::vector<SweepRow> resolution_sweep(const ExperimentConfig& base,
                                              std::span<const double> cell_widths) {
  std::vector<ExperimentConfig> cfgs;
  for (double l : cell_widths) {
    ExperimentConfig c = base;
    try {
      c.space = OutputSpace(base.space.range_deg(), l);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("resolution sweep: ") + e.what());
    }
    c.validate();
    cfgs.push_back(std::move(c));
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    rows.push_back({cell_widths[i], cell_widths[i] / 4.0, run_experiment(cfgs[i])});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Wasserstein curves

struct WdPoint {
  double p = 0.0;
  double wd_uld = 0.0;
  double wd_onehot = 0.0;
};

/// WD of ULD(p) and one-hot(p) against the 0-degree one-hot over [0, r].
inline std::vector<WdPoint> wd_curve(const OutputSpace& space, double step_deg) {
  if (!(step_deg > 0.0)) throw DomainError("wd_curve: step must be > 0");
  const auto origin = encode_one_hot(space, 0.0);
  std::vector<WdPoint> out;
  for (std::size_t i = 0;; ++i) {
    double p = static_cast<double>(i) * step_deg;
    if (p > space.range_deg() + 1e-9) break;
    p = std::min(p, space.range_deg());
    out.push_back({p, wasserstein_1d(encode_uld(space, p), origin),
                   wasserstein_1d(encode_one_hot(space, p), origin)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report files

enum class ReportFormat { Csv, Json };

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {"encoding", "loss",     "activation", "acc",
                                                "mae_top1", "mae_wad2", "mae_wad3",   "qe_limit",
                                                "seed",     "runtime_s"};
  return cols;
}

namespace detail {

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string csv_fields(const ExperimentReport& r) {
  auto dec = [&](const char* k) {
    const auto it = r.mae_by_decoder.find(k);
    return it == r.mae_by_decoder.end() ? std::string() : fmt_double(it->second);
  };
  return r.encoding + ',' + r.loss + ',' + r.activation + ',' + fmt_double(r.acc_percent) + ',' +
         dec("top1") + ',' + dec("wad2") + ',' + dec("wad3") + ',' + fmt_double(r.qe_limit) + ',' +
         std::to_string(r.seed) + ',' + fmt_double(r.runtime_s);
}

inline std::string header_line() {
  std::string h;
  for (const auto& c : report_columns()) h += (h.empty() ? "" : ",") + c;
  return h;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentReport& r) {
  return {{"encoding", r.encoding},
          {"loss", r.loss},
          {"activation", r.activation},
          {"acc", r.acc_percent},
          {"mae", r.mae_by_decoder},
          {"qe_limit", r.qe_limit},
          {"seed", r.seed},
          {"runtime_s", r.runtime_s},
          {"history",
           {{"train_loss", r.history.train_loss},
            {"val_loss", r.history.val_loss},
            {"val_acc", r.history.val_acc},
            {"lr", r.history.lr},
            {"best_epoch", r.history.best_epoch},
            {"stopped_early", r.history.stopped_early}}},
          {"config", r.config}};
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  r.encoding = j.at("encoding").get<std::string>();
  r.loss = j.at("loss").get<std::string>();
  r.activation = j.at("activation").get<std::string>();
  r.acc_percent = j.at("acc").get<double>();
  r.mae_by_decoder = j.at("mae").get<std::map<std::string, double>>();
  r.qe_limit = j.at("qe_limit").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.runtime_s = j.at("runtime_s").get<double>();
  const auto& h = j.at("history");
  r.history.train_loss = h.at("train_loss").get<std::vector<double>>();
  r.history.val_loss = h.at("val_loss").get<std::vector<double>>();
  r.history.val_acc = h.at("val_acc").get<std::vector<double>>();
  r.history.lr = h.at("lr").get<std::vector<double>>();
  r.history.best_epoch = h.at("best_epoch").get<std::size_t>();
  r.history.stopped_early = h.at("stopped_early").get<bool>();
  r.config = j.at("config");
  return r;
}

/// The report as it should compare across reruns: everything but wall time.
inline std::string deterministic_fingerprint(const ExperimentReport& r) {
  auto j = to_json(r);
  j.erase("runtime_s");
  return j.dump();
}

inline void emit_report(const ExperimentReport& r, const std::string& path, ReportFormat format) {
  auto out = detail::open_for_write(path);
  if (format == ReportFormat::Json) {
    out << to_json(r).dump(2) << '\n';
  } else {
    out << detail::header_line() << '\n' << detail::csv_fields(r) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Reads a report back. CSV files carry only the summary columns, so the
/// history and config fields of the result are empty.
inline ExperimentReport parse_report(const std::string& path, ReportFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  if (format == ReportFormat::Json) {
    try {
      return report_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ": " + e.what());
    }
  }
  std::string header;
  std::string row;
  if (!std::getline(in, header) || !std::getline(in, row)) throw IoError(path + ": truncated csv report");
  if (header != detail::header_line()) throw IoError(path + ": unexpected csv header");
  const auto f = detail::split(row, ',');
  if (f.size() != report_columns().size()) throw IoError(path + ": wrong number of csv fields");
  ExperimentReport r;
  r.encoding = f[0];
  r.loss = f[1];
  r.activation = f[2];
  r.acc_percent = std::stod(f[3]);
  const char* names[] = {"top1", "wad2", "wad3"};
  for (int i = 0; i < 3; ++i) {
    if (!f[4 + i].empty()) r.mae_by_decoder[names[i]] = std::stod(f[4 + i]);
  }
  r.qe_limit = std::stod(f[7]);
  r.seed = std::stoull(f[8]);
  r.runtime_s = std::stod(f[9]);
  return r;
}

inline void emit_sweep_csv(std::span<const SweepRow> rows, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "cell_deg,expected_qe," << detail::header_line() << '\n';
  for (const auto& r : rows) {
    out << detail::fmt_double(r.cell_deg) << ',' << detail::fmt_double(r.expected_qe) << ','
        << detail::csv_fields(r.report) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void emit_wd_curve_csv(std::span<const WdPoint> curve, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "p,wd_uld,wd_onehot\n";
  for (const auto& pt : curve) {
    out << detail::fmt_double(pt.p) << ',' << detail::fmt_double(pt.wd_uld) << ','
        << detail::fmt_double(pt.wd_onehot) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Encoding x loss grid

enum class CellStatus { Ok, NotApplicable, Failed };

struct GridCell {
  LabelEncoding encoding = LabelEncoding::ULD;
  LossKind loss = LossKind::NLAE;
  CellStatus status = CellStatus::Ok;
  std::optional<ExperimentReport> report;
  std::string error;

  std::string key() const { return std::string(to_string(encoding)) + "/" + std::string(to_string(loss)); }
};

/// Worker count: DOA_ARCH_THREADS if set and positive, else logical cores.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("DOA_ARCH_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs every compatible encoding x loss cell (each with its loss's default
/// activation). Incompatible cells are recorded as not applicable; failures
/// are captured per cell. `on_done` is called for each finished cell, under
/// a lock. Output is sorted by cell key.
template <class OnDone>
std::vector<GridCell> run_grid(const ExperimentConfig& base, std::span<const LabelEncoding> encodings,
                               std::span<const LossKind> losses, OnDone on_done,
                               std::size_t threads = worker_count()) {
  std::vector<GridCell> cells;
  std::vector<ExperimentConfig> cfgs;
  for (auto e : encodings) {
    for (auto l : losses) {
      ExperimentConfig c = base;
      c.encoding = e;
      c.loss = l;
      c.activation = default_activation(l);
      GridCell cell{e, l, CellStatus::Ok, std::nullopt, {}};
      if (!c.objective().compatible()) cell.status = CellStatus::NotApplicable;
      cells.push_back(cell);
      cfgs.push_back(std::move(c));
    }
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      if (cells[i].status != CellStatus::NotApplicable) {
        if (cancel_requested()) {
          cells[i].status = CellStatus::Failed;
          cells[i].error = "cancelled";
        } else {
          try {
            cells[i].report = run_experiment(cfgs[i]);
          } catch (const std::exception& e) {
            cells[i].status = CellStatus::Failed;
            cells[i].error = e.what();
          }
        }
      }
      std::lock_guard lock(mu);
      on_done(cells[i]);
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::max<std::size_t>(1, std::min(threads, cells.size())); ++t) {
      pool.emplace_back(worker);
    }
  }
  std::sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) { return a.key() < b.key(); });
  return cells;
}

inline void emit_grid_csv(std::span<const GridCell> cells, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << detail::header_line() << ",status\n";
  for (const auto& c : cells) {
    if (c.report) {
      out << detail::csv_fields(*c.report) << ",ok\n";
    } else {
      const std::string na = c.status == CellStatus::NotApplicable ? "n/a" : "failed";
      out << to_string(c.encoding) << ',' << to_string(c.loss) << ','
          << to_string(default_activation(c.loss));
      for (int i = 0; i < 7; ++i) out << ',' << na;
      out << ',' << na << '\n';
    }
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace doa
