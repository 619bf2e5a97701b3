// Copyright 2026 The mvforge Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "artifacts.hpp"
#include "config.hpp"
#include "mvforge/errors.hpp"
#include "pipeline.hpp"
#include "stages.hpp"

namespace mvforge::harness {
namespace {

namespace fs = std::filesystem;

constexpr const char* kSmall = R"([output]
dir = out

[population]
speakers_per_gender = 5
train_speakers_per_gender = 4
train_utterances = 5
enrolled = 4
probes = 2
seeds_per_gender = 2

[encoder]
epochs = 3

[attack.white]
epochs = 2
batch_size = 8

[attack.black]
epochs = 1
batch_size = 12
nes_samples = 3

[attack.clone]
epochs = 1
batch_size = 12
nes_samples = 3

[coverage]
attempts = 2
bootstrap = 4
)";

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mvforge-harness-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an mvforge::Error";
  return ErrorKind::kNumerical;
}

TEST(Config, DefaultsValidate) {
  const ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.monitor_rule, verification::ScoringRule::kAny);
  EXPECT_FALSE(cfg.to_json().contains("output_dir"));
}

TEST(Config, ParsesSections) {
  const ExperimentConfig cfg = parse_config(kSmall);
  EXPECT_EQ(cfg.speakers_per_gender, 5);
  EXPECT_EQ(cfg.enrolled, 4);
  EXPECT_EQ(cfg.white.epochs, 2);
  EXPECT_EQ(cfg.black.nes.samples, 3);
  EXPECT_EQ(cfg.attempts, 2);
  EXPECT_EQ(cfg.train_epochs, 3);
  EXPECT_EQ(cfg.test_seed, ExperimentConfig{}.test_seed);
}

TEST(Config, RejectsUnknownAndInvalid) {
  EXPECT_EQ(kind_of([] { parse_config("[population]\nspeakerz = 3\n"); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { parse_config("[nonsense]\na = 1\n"); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { parse_config("[encoder]\nepochs = -1\n"); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { parse_config("[encoder]\nepochs = many\n"); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { load_config("/nonexistent/mvforge.ini"); }), ErrorKind::kConfig);
}

TEST(Artifacts, Sha256KnownAnswer) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Artifacts, CsvRoundTrip) {
  const fs::path dir = scratch_dir("csv");
  CsvWriter w({"name", "value"});
  w.row({"plain", "1"}).row({"with,comma", "say \"hi\""});
  EXPECT_EQ(w.rows(), 2u);
  EXPECT_THROW(w.row({"too", "many", "fields"}), Error);
  w.save(dir / "t.csv");
  const CsvTable t = read_csv(dir / "t.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"name", "value"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][0], "with,comma");
  EXPECT_EQ(t.rows[1][1], "say \"hi\"");
  EXPECT_EQ(t.column("value"), 1u);
  fs::remove_all(dir);
}

TEST(Artifacts, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(AttackJobs, NamesRoundTrip) {
  for (const char* n : {"waveform-white", "waveform-black", "waveform-white-augment",
                        "spectrogram-white", "clone-black"}) {
    EXPECT_EQ(parse_attack_job(n).name(), n);
  }
  EXPECT_THROW(parse_attack_job("waveform-grey"), Error);
}

// One small pipeline shared by the stage tests.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = scratch_dir("pipeline");
    write_file(root_ / "experiment.ini", kSmall);
    cfg_ = load_config(root_ / "experiment.ini");
    out_ = cfg_.output_dir;
    cmd_gen_data(cfg_, {});
    cmd_train_encoder(cfg_, {});
    cmd_calibrate(cfg_, {});
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static StageOptions job(const std::string& name) {
    StageOptions o;
    o.job = parse_attack_job(name);
    return o;
  }

  static inline fs::path root_;
  static inline fs::path out_;
  static inline ExperimentConfig cfg_;
};

TEST_F(Pipeline, ManifestsListOutputsWithChecksums) {
  for (const char* stage : {"data", "encoders", "calibration"}) {
    const auto m = read_json(out_ / stage / "manifest.json");
    ASSERT_TRUE(m.contains("outputs"));
    for (const auto& o : m.at("outputs")) {
      const fs::path p = out_ / o.at("path").get<std::string>();
      ASSERT_TRUE(fs::exists(p)) << p;
      EXPECT_EQ(o.at("sha256").get<std::string>(), sha256_file(p));
    }
  }
}

TEST_F(Pipeline, RefusesToOverwriteWithoutForce) {
  EXPECT_EQ(kind_of([] { cmd_gen_data(cfg_, {}); }), ErrorKind::kPrecondition);
}

TEST_F(Pipeline, UpstreamMismatchIsReported) {
  ExperimentConfig other = cfg_;
  other.output_dir = root_ / "other";
  EXPECT_EQ(kind_of([&] { cmd_calibrate(other, {}); }), ErrorKind::kPrecondition);
  other.output_dir = out_;
  other.train_epochs = 4;  // encoders were trained with 3
  StageOptions force;
  force.force = true;
  EXPECT_EQ(kind_of([&] { cmd_calibrate(other, force); }), ErrorKind::kPrecondition);
}

TEST_F(Pipeline, LossHasOneRowPerEpoch) {
  for (const auto& arch : cfg_.encoders) {
    const CsvTable t = read_csv(out_ / "encoders" / ("loss_" + arch + ".csv"));
    EXPECT_EQ(t.rows.size(), static_cast<std::size_t>(cfg_.train_epochs)) << arch;
  }
}

TEST_F(Pipeline, ThresholdsAndRocs) {
  const auto j = read_json(out_ / "calibration" / "thresholds.json");
  for (const auto& arch : cfg_.encoders) {
    ASSERT_TRUE(j.contains(arch));
    const Thresholds t = Thresholds::from_json(j.at(arch));
    for (const OperatingPoint* p : {&t.raw, &t.any, &t.avg}) {
      EXPECT_GE(p->auc, 0.0);
      EXPECT_LE(p->auc, 1.0);
      EXPECT_LE(p->far_at_threshold, cfg_.far_target + 1e-12);
    }
    for (const char* kind : {"raw", "any", "avg"}) {
      const CsvTable roc = read_csv(out_ / "calibration" / ("roc_" + arch + "_" + kind + ".csv"));
      const std::size_t col = roc.column("threshold");
      ASSERT_GE(roc.rows.size(), 2u);
      for (std::size_t i = 1; i < roc.rows.size(); ++i) {
        EXPECT_LT(std::stod(roc.rows[i - 1][col]), std::stod(roc.rows[i][col]));
      }
    }
  }
}

TEST_F(Pipeline, ReportWithoutAttacks) {
  cmd_report(cfg_, {});
  std::size_t csvs = 0, svgs = 0;
  for (const auto& e : fs::recursive_directory_iterator(out_)) {
    if (e.path().extension() == ".csv") ++csvs;
    if (e.path().extension() == ".svg") ++svgs;
  }
  EXPECT_GT(csvs, 0u);
  EXPECT_EQ(svgs, csvs);
  const auto summary = read_json(out_ / "report" / "summary.json");
  EXPECT_EQ(summary.at("tool_version").get<std::string>(), kToolVersion);
  EXPECT_TRUE(summary.at("attacks").empty());
  fs::remove_all(out_ / "report");
}

TEST_F(Pipeline, AttackEvaluateCoverage) {
  EXPECT_EQ(kind_of([] { cmd_coverage(cfg_, {}); }), ErrorKind::kPrecondition);
  StageOptions bad = job("spectrogram-white");
  bad.job.augment = true;
  EXPECT_EQ(kind_of([&] { cmd_attack(cfg_, bad); }), ErrorKind::kConfig);

  cmd_attack(cfg_, job("waveform-white"));
  const fs::path run = out_ / "attacks" / "waveform-white";
  const CsvTable results = read_csv(run / "results.csv");
  EXPECT_EQ(results.rows.size(), static_cast<std::size_t>(2 * cfg_.seeds_per_gender));
  const CsvTable history = read_csv(run / "ir_history.csv");
  EXPECT_EQ(history.rows.size(), results.rows.size() * (cfg_.white.epochs + 1u));
  for (const auto& r : results.rows) {
    EXPECT_TRUE(fs::exists(run / ("mv_" + r[results.column("seed_id")] + ".wav")));
  }

  StageOptions eval;
  eval.transfer = true;
  cmd_evaluate(cfg_, eval);
  const CsvTable table = read_csv(out_ / "evaluate" / "ir_table.csv");
  std::set<std::string> encoders;
  for (const auto& r : table.rows) {
    encoders.insert(r[table.column("encoder")]);
    const double ir = std::stod(r[table.column("mv_ir")]);
    EXPECT_GE(ir, 0.0);
    EXPECT_LE(ir, 1.0);
  }
  EXPECT_EQ(encoders.size(), cfg_.encoders.size());
  EXPECT_TRUE(fs::exists(out_ / "evaluate" / "transfer.csv"));

  cmd_coverage(cfg_, {});
  for (const char* label : {"A", "B", "mixed"}) {
    const CsvTable curves = read_csv(out_ / "coverage" / (std::string("curves_") + label + ".csv"));
    std::map<std::string, std::vector<double>> by_key;
    for (const auto& r : curves.rows) {
      by_key[r[curves.column("voice")] + "/" + r[curves.column("strategy")] + "/" +
             r[curves.column("population")]]
          .push_back(std::stod(r[curves.column("ir_mean")]));
    }
    ASSERT_FALSE(by_key.empty());
    for (const auto& [key, curve] : by_key) {
      EXPECT_EQ(curve.size(), static_cast<std::size_t>(cfg_.attempts)) << key;
      EXPECT_TRUE(std::is_sorted(curve.begin(), curve.end())) << key;
    }
    // With two attempts the greedy second pick maximizes the union, so it
    // never trails the static ranking on the users it was selected for.
    for (const char* voice : {"seed", "master"}) {
      const std::string base = std::string(voice) + "/";
      const auto comp = by_key.find(base + "comp/optimization");
      const auto ind = by_key.find(base + "ind/optimization");
      ASSERT_NE(comp, by_key.end());
      ASSERT_NE(ind, by_key.end());
      EXPECT_GE(comp->second.back(), ind->second.back() - 1e-12);
    }
  }

  cmd_report(cfg_, {});
  const auto summary = read_json(out_ / "report" / "summary.json");
  EXPECT_TRUE(summary.at("attacks").contains("waveform-white"));
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string("\"") + MVFORGE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  EXPECT_EQ(run("--version"), 0);
  EXPECT_EQ(run("gen-data"), 1);
  EXPECT_EQ(run("gen-data --config " + (dir / "missing.ini").string()), 1);
  write_file(dir / "bad.ini", "[population]\nspeakerz = 3\n");
  EXPECT_EQ(run("gen-data --config " + (dir / "bad.ini").string()), 1);
  write_file(dir / "ok.ini", kSmall);
  EXPECT_EQ(run("calibrate --config " + (dir / "ok.ini").string()), 2);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace mvforge::harness
