// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doa/cli.hpp"

namespace doa {
namespace {

struct CliRun {
  int status = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "doa_arch");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("doa_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
  }

  std::vector<std::string> small_args() const {
    return {"--out-dir", dir_.string(), "count=300", "validation_count=60", "test_count=60",
            "freq_bins=4", "hidden=16", "max_epochs=2"};
  }

  std::filesystem::path dir_;
};

std::size_t line_count(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

TEST(Config, ParseErrorsCarryLine) {
  try {
    parse_config_text("seed = 1\nthis line is wrong\n", "exp.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("exp.cfg:2"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text("seed = 1\nseed = 2\n", "x"), ConfigError);
}

TEST(Config, CommentsAndWhitespace) {
  const auto doc = parse_config_text("# header\n  loss =  bce # trailing\n\nseed=4\n", "x");
  ASSERT_EQ(doc.size(), 2u);
  EXPECT_EQ(doc.at("loss").value, "bce");
  EXPECT_EQ(doc.at("loss").origin, "x:2");
}

TEST(Config, UnknownKeyAndBadValueNameOrigin) {
  ExperimentConfig cfg;
  RunOptions run;
  try {
    apply_config(parse_config_text("seed = 1\nlearning_rate = 3\n", "a.cfg"), cfg, run);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("a.cfg:2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
  EXPECT_THROW(apply_config(parse_config_text("max_epochs = many\n", "b"), cfg, run), ConfigError);
  EXPECT_THROW(apply_config(parse_config_text("cell_deg = 7\n", "b"), cfg, run), ConfigError);
}

TEST(Config, OverridesWinOverFile) {
  ConfigDoc doc = parse_config_text("loss = bce\nseed = 1\ncell_deg = 10\n", "f");
  apply_overrides(doc, {"seed=9", "loss=mse_wo"});
  ExperimentConfig cfg;
  RunOptions run;
  apply_config(doc, cfg, run);
  EXPECT_EQ(cfg.train.seed, 9u);
  EXPECT_EQ(cfg.data.seed, 9u);
  EXPECT_EQ(cfg.loss, LossKind::MSEwo);
  EXPECT_EQ(cfg.activation, Activation::ClampIdentity);
  EXPECT_EQ(cfg.space.cell_deg(), 10.0);
  EXPECT_THROW(apply_overrides(doc, {"novalue"}), ConfigError);
}

TEST(Config, ListsSelectGridAndSweep) {
  ExperimentConfig cfg;
  RunOptions run;
  apply_config(parse_config_text("encoding = uld, one_hot\nloss = ce\ncell_deg = 45,20,10\n", "f"), cfg, run);
  EXPECT_EQ(run.grid_encodings.size(), 2u);
  EXPECT_EQ(run.sweep_cell_deg, (std::vector<double>{45.0, 20.0, 10.0}));
  EXPECT_EQ(cfg.space.cell_deg(), 5.0);
}

TEST_F(CliTest, FlagsWinOverOverrides) {
  write("exp.cfg", "seed = 1\ncount = 50\nvalidation_count = 5\ntest_count = 5\nfreq_bins = 4\n");
  const auto r = run({"gen-data", "--config", path("exp.cfg"), "--seed", "7", "--out-dir", dir_.string(), "seed=3"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto [spec, samples] = read_dataset_file(path("train.jsonl"));
  EXPECT_EQ(spec.seed, 7u);
  EXPECT_EQ(samples.size(), 50u);
}

TEST_F(CliTest, GenDataWritesRequestedRecords) {
  const auto r = run({"gen-data", "--out-dir", dir_.string(), "count=100", "freq_bins=4"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(line_count(path("train.jsonl")), 101u);  // header + records
  EXPECT_EQ(line_count(path("validation.jsonl")), 11u);
  EXPECT_EQ(line_count(path("test.jsonl")), 11u);
}

TEST_F(CliTest, TrainThenEvalReproducesReport) {
  auto args = small_args();
  args.insert(args.begin(), "train");
  const auto t = run(args);
  ASSERT_EQ(t.status, 0) << t.err;
  ASSERT_TRUE(std::filesystem::exists(path("checkpoint.json")));
  ASSERT_TRUE(std::filesystem::exists(path("report.csv")));
  const auto e = run({"eval", "--out-dir", dir_.string()});
  ASSERT_EQ(e.status, 0) << e.err;
  EXPECT_NE(e.out.find("matches train-time report: yes"), std::string::npos) << e.out;
  EXPECT_EQ(deterministic_fingerprint(parse_report(path("report.json"), ReportFormat::Json)),
            deterministic_fingerprint(parse_report(path("eval_report.json"), ReportFormat::Json)));
}

TEST_F(CliTest, EvalRejectsCorruptCheckpoint) {
  write("checkpoint.json", "{\"format\": \"something else\"}");
  const auto e = run({"eval", "--out-dir", dir_.string()});
  EXPECT_EQ(e.status, 2);
  EXPECT_NE(e.err.find("checkpoint"), std::string::npos);
}

TEST_F(CliTest, IncompatibleTrainFailsFast) {
  const auto r = run({"train", "--out-dir", dir_.string(), "--encoding", "glc", "--loss", "ce"});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("incompatible"), std::string::npos);
}

TEST_F(CliTest, GridMarksNotApplicableCells) {
  auto args = small_args();
  args.insert(args.begin(), {"train", "--encoding", "glc,uld", "--loss", "ce,bce"});
  args.push_back("max_epochs=1");
  const auto r = run(args);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(line_count(path("grid.csv")), 5u);
  EXPECT_NE(r.out.find("glc/ce: n/a"), std::string::npos);
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(path("cells")), {}), 3);
}

TEST_F(CliTest, SweepWritesOneRowPerWidth) {
  auto args = small_args();
  args.insert(args.begin(), {"sweep", "--cell-deg", "45,20,10"});
  const auto r = run(args);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(line_count(path("sweep.csv")), 4u);
}

TEST_F(CliTest, SweepRejectsNonDivisor) {
  auto args = small_args();
  args.insert(args.begin(), {"sweep", "--cell-deg", "45,7"});
  EXPECT_EQ(run(args).status, 2);
}

TEST_F(CliTest, VerifyPasses) {
  const auto r = run({"verify", "--samples", "200000", "--out-dir", dir_.string()});
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("all checks passed"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(path("verify.json")));
  EXPECT_EQ(line_count(path("wd_curve.csv")), 1802u);
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(run({}).status, 0);
  EXPECT_NE(run({"bogus"}).status, 0);
  EXPECT_EQ(run({"train", "--alpha", "abc"}).status != 0, true);
}

}  // namespace
}  // namespace doa
