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

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "artifacts.hpp"
#include "config.hpp"
#include "mvforge/errors.hpp"
#include "stages.hpp"

namespace {

using mvforge::harness::ExperimentConfig;
using mvforge::harness::StageOptions;
using StageFn = void (*)(const ExperimentConfig&, const StageOptions&);

int exit_code(mvforge::ErrorKind kind) {
  switch (kind) {
    case mvforge::ErrorKind::kConfig:
      return 1;
    case mvforge::ErrorKind::kPrecondition:
      return 2;
    case mvforge::ErrorKind::kNumerical:
      return 3;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Master voice generation and evaluation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mvforge::harness::kToolVersion));

  std::string config_path;
  StageOptions options;
  std::string domain = "waveform";
  std::string threat = "white";
  StageFn selected = nullptr;

  auto add_stage = [&](const char* name, const char* help, StageFn fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment INI file")->required()->check(
        CLI::ExistingFile);
    sub->add_flag("--force", options.force, "overwrite existing stage outputs");
    sub->callback([&selected, fn] { selected = fn; });
    return sub;
  };

  add_stage("gen-data", "render speaker populations and seed voices",
            mvforge::harness::cmd_gen_data);
  add_stage("train-encoder", "train the configured speaker encoders",
            mvforge::harness::cmd_train_encoder);
  add_stage("calibrate", "embed populations and pick operating thresholds",
            mvforge::harness::cmd_calibrate);
  CLI::App* attack = add_stage("attack", "optimize master voices from every seed voice",
                               mvforge::harness::cmd_attack);
  attack->add_option("--domain", domain, "waveform, spectrogram or clone")
      ->check(CLI::IsMember({"waveform", "spectrogram", "clone"}));
  attack->add_option("--threat", threat, "white or black box access")
      ->check(CLI::IsMember({"white", "black"}));
  attack->add_flag("--augment", options.job.augment, "optimize through simulated playback");
  CLI::App* evaluate = add_stage("evaluate", "impersonation rates of every attack run",
                                 mvforge::harness::cmd_evaluate);
  evaluate->add_flag("--transfer", options.transfer, "also score against the other encoders");
  add_stage("coverage", "multi-attempt selection curves", mvforge::harness::cmd_coverage);
  add_stage("report", "plots and summary.json", mvforge::harness::cmd_report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    options.job.domain = mvforge::attack::domain_from_string(domain);
    options.job.black_box = threat == "black";
    const ExperimentConfig cfg = mvforge::harness::load_config(config_path);
    selected(cfg, options);
  } catch (const mvforge::Error& e) {
    std::fprintf(stderr, "mvforge: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mvforge: %s\n", e.what());
    return 2;
  }
  return 0;
}
