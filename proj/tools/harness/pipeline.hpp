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
#include <optional>
#include <utility>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "mvforge/attack.hpp"
#include "mvforge/encoder.hpp"
#include "mvforge/playback.hpp"
#include "mvforge/verification.hpp"
#include "mvforge/voicegen.hpp"

namespace mvforge::harness {

using encoder::Embedding;
using voicegen::Gender;

enum class Role { kTrain, kOptimization, kTest, kSeedVoices };
std::string to_string(Role role);

voicegen::PopulationSpec population_spec(const ExperimentConfig& cfg, Role role);

/// Embeddings of every utterance of every speaker under one encoder.
struct EmbeddedPopulation {
  std::string encoder_id;
  std::string population_id;
  std::vector<std::string> ids;
  std::vector<Gender> genders;
  std::vector<std::vector<Embedding>> embeddings;

  std::size_t size() const { return ids.size(); }
  std::vector<std::size_t> speakers_of(std::optional<Gender> g) const;

  std::vector<std::uint8_t> to_cbor() const;
  static EmbeddedPopulation from_cbor(const std::vector<std::uint8_t>& bytes);
};

EmbeddedPopulation embed_population(const voicegen::Population& pop,
                                    const encoder::ToyEncoder& enc, std::string population_id);

encoder::TrainResult train_stock_encoder(const ExperimentConfig& cfg, const std::string& arch_id,
                                         const voicegen::Population& train);

/// First `n` embeddings of each speaker; all speakers when `g` is empty.
verification::Gallery enrollment_gallery(const EmbeddedPopulation& pop, std::optional<Gender> g,
                                         int n);
/// The enrolled embeddings of one gender, the attack's optimization targets.
std::vector<Embedding> attack_targets(const EmbeddedPopulation& pop, Gender g, int n);

/// Single-utterance pairs: every same-speaker pair, and the first two
/// utterances of every pair of different speakers.
verification::ScoreSet raw_scores(const EmbeddedPopulation& pop);
/// Utterances after the first n probe every enrolled user.
verification::ScoreSet policy_scores(const EmbeddedPopulation& pop, int n,
                                     verification::ScoringRule rule, bool normalize_avg);

struct OperatingPoint {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double far_threshold = 0.0;
  double far_at_threshold = 0.0;
  double auc = 0.0;
};
OperatingPoint operating_point(std::span<const verification::RocPoint> curve, double far_target);

/// Operating points of the raw, any-n and avg-n comparisons.
struct Thresholds {
  OperatingPoint raw;
  OperatingPoint any;
  OperatingPoint avg;

  const OperatingPoint& of(verification::ScoringRule rule) const {
    return rule == verification::ScoringRule::kAny ? any : avg;
  }
  nlohmann::json to_json() const;
  static Thresholds from_json(const nlohmann::json& j);
};

struct Calibration {
  Thresholds thresholds;
  std::vector<verification::RocPoint> raw_roc;
  std::vector<verification::RocPoint> any_roc;
  std::vector<verification::RocPoint> avg_roc;
};
Calibration calibrate(const EmbeddedPopulation& opt, const ExperimentConfig& cfg);

/// Policy at the raw far-target threshold, the operating point the headline
/// impersonation rates use.
verification::Policy raw_policy(const ExperimentConfig& cfg, const Thresholds& t,
                                verification::ScoringRule rule);
/// Policy at the threshold calibrated on the policy's own scores.
verification::Policy calibrated_policy(const ExperimentConfig& cfg, const Thresholds& t,
                                       verification::ScoringRule rule);

struct SeedVoice {
  std::string id;
  Gender gender;
  encoder::Waveform waveform;
};
std::vector<SeedVoice> seed_voices(const ExperimentConfig& cfg);

struct AttackJob {
  attack::Domain domain = attack::Domain::kWaveform;
  bool black_box = false;
  bool augment = false;

  /// "<domain>-<white|black>[-augment]".
  std::string name() const;
};
AttackJob parse_attack_job(const std::string& name);

const AttackSettings& attack_settings(const ExperimentConfig& cfg, const AttackJob& job);
attack::AttackConfig attack_config(const ExperimentConfig& cfg, const AttackJob& job,
                                   std::size_t seed_index);

attack::PlaybackKernels playback_kernels(const ExperimentConfig& cfg);

/// Attack resources bound to kernels and a clone model owned by the caller.
attack::AttackResources attack_resources(const ExperimentConfig& cfg,
                                         const attack::PlaybackKernels& kernels,
                                         const voicegen::CloneModel& clone);

attack::MasterVoice run_attack(const ExperimentConfig& cfg, const AttackJob& job,
                               std::size_t seed_index, const SeedVoice& seed,
                               const encoder::EncoderHandle& target,
                               std::span<const Embedding> targets,
                               const attack::Monitor& monitor,
                               const attack::AttackResources& resources);

/// Mean impersonation rate of `w` heard through `trials` playback draws.
double playback_impersonation_rate(const encoder::Waveform& w, const encoder::EncoderHandle& enc,
                                   const attack::PlaybackKernels& kernels,
                                   const verification::Gallery& gallery,
                                   const verification::Policy& policy, int trials,
                                   std::uint64_t seed);

enum class Strategy { kRandom, kIndependent, kComplementary };
std::string to_string(Strategy s);

/// Per-attempt cumulative impersonation rates, mean and standard deviation
/// over bootstrap repetitions.
struct CoverageCurves {
  std::vector<double> optimization_mean;
  std::vector<double> optimization_std;
  std::vector<double> test_mean;
  std::vector<double> test_std;
};

/// Each repetition selects `attempts` candidates on a random `fraction` of the
/// optimization users and scores the selection on those users and on the
/// full test gallery. Curves shorter than `attempts` repeat their last value.
std::vector<std::pair<Strategy, CoverageCurves>> bootstrap_coverage(
    std::span<const Embedding> candidates, const verification::Gallery& optimization,
    const verification::Gallery& test, const verification::Policy& policy, int attempts,
    int repetitions, double fraction, std::uint64_t seed);

/// Round trip through the float WAV encoding used for artifacts.
encoder::Waveform as_stored(const encoder::Waveform& w);

}  // namespace mvforge::harness
