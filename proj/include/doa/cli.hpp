// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: gen-data, train, eval, sweep, verify.
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "doa/config.hpp"
#include "doa/eval.hpp"
#include "doa/net.hpp"
#include "doa/sim.hpp"
#include "doa/verify.hpp"

namespace doa {

struct CliFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string encoding;
  std::string loss;
  std::string decoding;
  std::optional<double> alpha;
  std::string cell_deg;
  std::optional<std::size_t> samples;
  std::vector<std::string> overrides;
};

inline void write_checkpoint(const std::string& path, const ExperimentConfig& cfg, const Network& net,
                             const ExperimentReport& report) {
  nlohmann::json j = {{"format", "doa-arch-checkpoint"},
                      {"version", kCheckpointVersion},
                      {"config", to_json(cfg)},
                      {"layers", network_to_json(net)},
                      {"report", to_json(report)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

struct Checkpoint {
  ExperimentConfig config;
  Network net;
  ExperimentReport report;
};

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "doa-arch-checkpoint") throw IoError(path + ": not a checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) throw IoError(path + ": unsupported checkpoint version");
    Checkpoint c{experiment_config_from_json(j.at("config")), network_from_json(j.at("layers")),
                 report_from_json(j.at("report"))};
    const std::size_t expected_out = c.config.objective().output_dim();
    if (c.net.output_dim() != expected_out) throw IoError(path + ": output layer does not match the config");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

namespace detail {

inline std::string out_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void resolve(const CliFlags& f, ExperimentConfig& cfg, RunOptions& run) {
  ConfigDoc doc;
  if (!f.config_path.empty()) doc = load_config_file(f.config_path);
  apply_overrides(doc, f.overrides);
  std::vector<std::string> flag_overrides;
  if (f.seed) flag_overrides.push_back("seed=" + std::to_string(*f.seed));
  if (!f.encoding.empty()) flag_overrides.push_back("encoding=" + f.encoding);
  if (!f.loss.empty()) flag_overrides.push_back("loss=" + f.loss);
  if (!f.decoding.empty()) flag_overrides.push_back("decoding=" + f.decoding);
  if (f.alpha) flag_overrides.push_back("alpha=" + fmt_double(*f.alpha));
  if (!f.cell_deg.empty()) flag_overrides.push_back("cell_deg=" + f.cell_deg);
  apply_overrides(doc, flag_overrides);
  apply_config(doc, cfg, run);
}

inline int cmd_gen_data(const CliFlags& f, std::ostream& out) {
  ExperimentConfig cfg;
  RunOptions run;
  resolve(f, cfg, run);
  const DatasetSpec spec = cfg.dataset_spec();
  const Dataset ds = build_dataset(spec);
  std::filesystem::create_directories(f.out_dir);
  write_dataset_file(out_path(f.out_dir, "train.jsonl"), spec, Split::Train, ds.train);
  write_dataset_file(out_path(f.out_dir, "validation.jsonl"), spec, Split::Validation, ds.validation);
  write_dataset_file(out_path(f.out_dir, "test.jsonl"), spec, Split::Test, ds.test);
  out << "wrote " << ds.train.size() << "/" << ds.validation.size() << "/" << ds.test.size()
      << " samples to " << f.out_dir << "\n";
  return 0;
}

inline void print_report(std::ostream& out, const ExperimentReport& r) {
  out << r.encoding << "+" << r.loss << " (" << r.activation << "): acc=" << r.acc_percent << "%";
  for (const auto& [k, v] : r.mae_by_decoder) out << " mae_" << k << "=" << v;
  out << " qe_limit=" << r.qe_limit << " runtime=" << r.runtime_s << "s\n";
}

inline int cmd_train(const CliFlags& f, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  RunOptions run;
  resolve(f, cfg, run);
  std::filesystem::create_directories(f.out_dir);
  const bool grid = run.grid_encodings.size() > 1 || run.grid_losses.size() > 1;
  if (!grid) {
    cfg.validate();
    const ExperimentOutcome o = run_experiment_full(cfg);
    write_checkpoint(out_path(f.out_dir, "checkpoint.json"), cfg, o.net, o.report);
    emit_report(o.report, out_path(f.out_dir, "report.json"), ReportFormat::Json);
    emit_report(o.report, out_path(f.out_dir, "report.csv"), ReportFormat::Csv);
    print_report(out, o.report);
    return 0;
  }
  std::vector<LabelEncoding> encodings = run.grid_encodings;
  std::vector<LossKind> losses = run.grid_losses;
  if (encodings.empty()) encodings = {cfg.encoding};
  if (losses.empty()) losses = {cfg.loss};
  const auto cells_dir = out_path(f.out_dir, "cells");
  std::filesystem::create_directories(cells_dir);
  const auto cells = run_grid(cfg, encodings, losses, [&](const GridCell& c) {
    if (c.report) {
      const std::string stem = std::string(to_string(c.encoding)) + "_" + std::string(to_string(c.loss));
      emit_report(*c.report, out_path(cells_dir, stem + ".json"), ReportFormat::Json);
      out << c.key() << ": ";
      print_report(out, *c.report);
    } else if (c.status == CellStatus::NotApplicable) {
      out << c.key() << ": n/a\n";
    }
  });
  emit_grid_csv(cells, out_path(f.out_dir, "grid.csv"));
  int failed = 0;
  for (const auto& c : cells) {
    if (c.status == CellStatus::Failed) {
      err << "cell " << c.key() << " failed: " << c.error << "\n";
      ++failed;
    }
  }
  return failed == 0 ? 0 : 1;
}

inline int cmd_eval(const CliFlags& f, std::ostream& out) {
  ExperimentConfig ignored;
  RunOptions run;
  resolve(f, ignored, run);
  const std::string path = run.checkpoint.empty() ? out_path(f.out_dir, "checkpoint.json") : run.checkpoint;
  Checkpoint ck = read_checkpoint(path);
  if (!f.decoding.empty()) {
    ck.config.decoders.clear();
    for (const auto& d : split_list(f.decoding)) ck.config.decoders.push_back(parse_decoder(d));
  }
  const Dataset ds = build_dataset(ck.config.dataset_spec());
  const TestMetrics m = evaluate_network(ck.net, ck.config.objective(), ck.config.decoders, ds.test);
  const ExperimentReport r = make_report(ck.config, m, ck.report.history, ck.report.runtime_s);
  std::filesystem::create_directories(f.out_dir);
  emit_report(r, out_path(f.out_dir, "eval_report.json"), ReportFormat::Json);
  emit_report(r, out_path(f.out_dir, "eval_report.csv"), ReportFormat::Csv);
  print_report(out, r);
  out << "matches train-time report: "
      << (deterministic_fingerprint(r) == deterministic_fingerprint(ck.report) ? "yes" : "no") << "\n";
  return 0;
}

inline int cmd_sweep(const CliFlags& f, std::ostream& out) {
  ExperimentConfig cfg;
  RunOptions run;
  resolve(f, cfg, run);
  std::filesystem::create_directories(f.out_dir);
  const auto rows = resolution_sweep(cfg, run.sweep_cell_deg);
  emit_sweep_csv(rows, out_path(f.out_dir, "sweep.csv"));
  for (const auto& r : rows) {
    emit_report(r.report, out_path(f.out_dir, "sweep_l" + fmt_double(r.cell_deg) + ".json"), ReportFormat::Json);
    out << "l=" << r.cell_deg << " expected_qe=" << r.expected_qe << " ";
    print_report(out, r.report);
  }
  return 0;
}

inline int cmd_verify(const CliFlags& f, bool out_dir_given, std::ostream& out) {
  VerifyOptions opt;
  if (f.samples) opt.samples = *f.samples;
  if (f.seed) opt.seed = *f.seed;
  const auto results = run_verify_suite(opt);
  bool ok = true;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << "\n";
    ok = ok && r.passed;
    j.push_back({{"check", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  }
  if (out_dir_given) {
    std::filesystem::create_directories(f.out_dir);
    std::ofstream vf(out_path(f.out_dir, "verify.json"));
    vf << nlohmann::json{{"seed", opt.seed}, {"samples", opt.samples}, {"checks", j}}.dump(2) << '\n';
    emit_wd_curve_csv(wd_curve(OutputSpace(180.0, 5.0), 0.1), out_path(f.out_dir, "wd_curve.csv"));
  }
  out << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace detail

/// Entry point; returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Label-distribution DOA output architecture: data, training, evaluation"};
  app.require_subcommand(1);
  CliFlags f;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config_path, "key = value configuration file");
    sub->add_option("--seed", f.seed, "seed for every random stream");
    sub->add_option("--out-dir", f.out_dir, "output directory");
    sub->add_option("--encoding", f.encoding, "one_hot|uld|glc|sld|uld_glc (comma list for a grid)");
    sub->add_option("--loss", f.loss, "ce|bce|mse|wd|nlae|mse_wo (comma list for a grid)");
    sub->add_option("--decoding", f.decoding, "comma list of top1,wad2,wad3");
    sub->add_option("--alpha", f.alpha, "ULD weight of the uld_glc encoding");
    sub->add_option("--cell-deg", f.cell_deg, "cell width in degrees (comma list for sweep)");
    sub->add_option("--samples", f.samples, "Monte-Carlo sample count (verify)");
    sub->add_option("overrides", f.overrides, "key=value overrides");
  };
  auto* gen = app.add_subcommand("gen-data", "write train/validation/test dataset files");
  auto* trn = app.add_subcommand("train", "train and evaluate; grid when lists are given");
  auto* evl = app.add_subcommand("eval", "re-evaluate a checkpoint on its test split");
  auto* swp = app.add_subcommand("sweep", "resolution sweep over cell widths");
  auto* ver = app.add_subcommand("verify", "run the codec and loss self-checks");
  for (auto* s : {gen, trn, evl, swp, ver}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    if (gen->parsed()) return detail::cmd_gen_data(f, out);
    if (trn->parsed()) return detail::cmd_train(f, out, err);
    if (evl->parsed()) return detail::cmd_eval(f, out);
    if (swp->parsed()) return detail::cmd_sweep(f, out);
    if (ver->parsed()) return detail::cmd_verify(f, ver->count("--out-dir") > 0, out);
  } catch (const Cancelled&) {
    err << "interrupted\n";
    return 130;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace doa
