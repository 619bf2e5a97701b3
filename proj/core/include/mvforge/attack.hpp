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

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mvforge/audio.hpp"
#include "mvforge/encoder.hpp"
#include "mvforge/playback.hpp"
#include "mvforge/rng.hpp"
#include "mvforge/verification.hpp"
#include "mvforge/voicegen.hpp"

namespace mvforge::attack {

using encoder::Embedding;
using encoder::EncoderHandle;

enum class Domain { kWaveform, kSpectrogram, kClone };
std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

enum class NormMode { kL2, kLinfSign };
std::string to_string(NormMode m);
NormMode norm_mode_from_string(const std::string& s);

struct AttackConfig {
  Domain domain = Domain::kWaveform;
  double step_size = 0.001;
  int epochs = 20;
  int batch_size = 64;
  NormMode norm_mode = NormMode::kL2;
  double linf_budget = 0.0;  // LinfSign only
  bool playback_augment = false;
  std::uint64_t seed = 0;
  int griffin_lim_iters = 50;  // spectrogram-domain finalization

  /// step_size >= 0, epochs >= 1, batch_size >= 1, LinfSign needs a budget.
  void validate() const;
};

struct NesConfig {
  int samples = 100;  // antithetic pairs; 2 * samples queries per estimate
  double sigma = 0.001;

  void validate() const;
};

/// Per-epoch impersonation tracking on the optimization gallery.
struct Monitor {
  const verification::Gallery* gallery = nullptr;
  verification::Policy policy;
};

/// Optional collaborators of an attack run.
struct AttackResources {
  const PlaybackKernels* playback = nullptr;    // required when playback_augment is set
  const voicegen::CloneModel* clone = nullptr;  // required for the clone domain
  voicegen::TokenSequence prompt{};             // fixed text of cloned speech
};

struct MasterVoice {
  Waveform waveform;
  Domain domain = Domain::kWaveform;
  std::string seed_id;
  Eigen::VectorXd attack_vector;
  double seed_ir = 0.0;                   // monitor IR before the first step
  std::vector<double> ir_history;         // monitor IR after each epoch
  std::vector<double> objective_history;  // mean batch objective per epoch
  double distortion_snr = 0.0;            // dB against the seed waveform
};

/// Mean cosine between f and each batch embedding.
double similarity_objective(const Embedding& f, std::span<const Embedding> batch);

/// L2: g / |g| (zero stays zero); LinfSign: elementwise sign.
Eigen::VectorXd normalize_gradient(const Eigen::VectorXd& g, NormMode mode);

/// clip(w0 + v, [-1, 1]).
Waveform apply_waveform(const Waveform& seed, const Eigen::VectorXd& v);
/// max(base + v, 0) with v laid out column-major over bins x frames.
audio::Matrix apply_spectrogram(const audio::Matrix& base_magnitude, const Eigen::VectorXd& v);
/// Speech from clip(v, [0,1]^d) saying `prompt`, kStandardLength samples.
Waveform apply_clone(const voicegen::CloneModel& model, const voicegen::TokenSequence& prompt,
                     const Eigen::VectorXd& v, Rng& rng);

/// Materializes the attack sample as audio. The spectrogram domain runs
/// Griffin-Lim here and zero-pads to the seed length.
Waveform apply_domain(Domain domain, const Waveform& seed, const Eigen::VectorXd& v,
                      const AttackResources& resources, int griffin_lim_iters, Rng& rng);

/// Objective queried by NES. `stream` identifies the antithetic pair so that
/// both members see identical internal randomness.
using NesObjective = std::function<double(const Eigen::VectorXd& x, std::uint64_t stream)>;

/// (1 / 2 s sigma) sum_i [f(x + sigma d_i) - f(x - sigma d_i)] d_i, d_i ~ N(0, I).
Eigen::VectorXd nes_gradient(const NesObjective& objective, const Eigen::VectorXd& x,
                             const NesConfig& nes, Rng& rng);
Eigen::VectorXd nes_gradient(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& x, const NesConfig& nes, Rng& rng);

/// Batched gradient ascent on the similarity objective with analytic
/// gradients. Waveform and spectrogram domains only.
MasterVoice whitebox_optimize(const Waveform& seed, std::span<const Embedding> targets,
                              const EncoderHandle& encoder, const AttackConfig& cfg,
                              const Monitor& monitor, const AttackResources& resources = {});

/// Same loop with NES estimates from score queries. The clone domain starts
/// from the seed's clone embedding and stays inside the unit cube.
MasterVoice blackbox_optimize(const Waveform& seed, std::span<const Embedding> targets,
                              const EncoderHandle& encoder, const AttackConfig& cfg,
                              const NesConfig& nes, const Monitor& monitor,
                              const AttackResources& resources = {});

}  // namespace mvforge::attack
