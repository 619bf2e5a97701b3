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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvforge/attack.hpp"
#include "mvforge/verification.hpp"

namespace mvforge::harness {

/// Optimizer settings of one attack family.
struct AttackSettings {
  double step_size = 0.001;
  int epochs = 20;
  int batch_size = 64;
  attack::NormMode norm_mode = attack::NormMode::kL2;
  double linf_budget = 0.0;
  attack::NesConfig nes{};
};

struct ExperimentConfig {
  std::filesystem::path output_dir = "mvforge-out";

  // Populations. Every speaker renders enrolled + probes utterances.
  int speakers_per_gender = 100;
  int train_speakers_per_gender = 50;
  int train_utterances = 12;
  int enrolled = 10;
  int probes = 2;
  int seeds_per_gender = 10;
  std::uint64_t train_seed = 777;
  std::uint64_t optimization_seed = 1001;
  std::uint64_t test_seed = 2002;
  std::uint64_t seed_voice_seed = 3003;

  // Encoders.
  std::vector<std::string> encoders{"spec-a", "spec-b", "fbank-x"};
  int embed_dim = 64;
  int hidden_dim = 32;
  int train_epochs = 20;
  double learning_rate = 0.05;
  double logit_scale = 10.0;
  std::uint64_t training_seed = 5;

  // Calibration.
  double far_target = 0.01;
  bool normalize_avg = false;

  // Attacks.
  std::string target_encoder = "spec-a";
  verification::ScoringRule monitor_rule = verification::ScoringRule::kAny;
  std::uint64_t attack_seed = 1;
  int griffin_lim_iters = 50;
  AttackSettings white{0.001, 20, 64, attack::NormMode::kL2, 0.0, {}};
  AttackSettings black{0.01, 10, 256, attack::NormMode::kL2, 0.0, {100, 0.001}};
  AttackSettings clone{0.1, 10, 256, attack::NormMode::kL2, 0.0, {50, 0.025}};
  std::string clone_prompt = "please verify";
  double playback_noise_sigma = 0.025;
  std::uint64_t playback_seed = 99;
  int playback_trials = 5;

  // Coverage.
  int attempts = 5;
  int bootstrap_repetitions = 100;
  double subset_fraction = 0.75;
  std::uint64_t coverage_seed = 11;
  std::string coverage_run = "waveform-white";

  /// Throws a config error on any inconsistent value.
  void validate() const;
  /// Everything except the output location, which does not affect results.
  nlohmann::json to_json() const;
};

/// INI text with [population], [encoder], [calibration], [attack],
/// [attack.white], [attack.black], [attack.clone], [playback], [coverage] and
/// [output] sections. Unknown sections or keys are rejected.
ExperimentConfig parse_config(const std::string& ini_text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace mvforge::harness
