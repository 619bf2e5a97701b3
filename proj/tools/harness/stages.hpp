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

#include <optional>
#include <string>

#include "config.hpp"
#include "pipeline.hpp"

namespace mvforge::harness {

struct StageOptions {
  bool force = false;
  AttackJob job{};
  bool transfer = false;
};

/// Each stage writes <output_dir>/<stage>/ with a manifest.json listing every
/// output file and its SHA-256, plus a timings.json excluded from checksums.
void cmd_gen_data(const ExperimentConfig& cfg, const StageOptions& opt);
void cmd_train_encoder(const ExperimentConfig& cfg, const StageOptions& opt);
void cmd_calibrate(const ExperimentConfig& cfg, const StageOptions& opt);
void cmd_attack(const ExperimentConfig& cfg, const StageOptions& opt);
void cmd_evaluate(const ExperimentConfig& cfg, const StageOptions& opt);
void cmd_coverage(const ExperimentConfig& cfg, const StageOptions& opt);
void cmd_report(const ExperimentConfig& cfg, const StageOptions& opt);

}  // namespace mvforge::harness
