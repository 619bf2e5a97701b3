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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mvforge/audio.hpp"
#include "mvforge/rng.hpp"

namespace mvforge::voicegen {

using audio::Waveform;

/// Low-f0 (A) and high-f0 (B) speaker clusters. 165 Hz belongs to B.
enum class Gender { kA, kB };

std::string to_string(Gender g);
Gender gender_from_string(const std::string& s);

inline constexpr double kGenderBoundaryHz = 165.0;

struct Formant {
  double center_hz = 0.0;
  double bandwidth_hz = 0.0;
};

inline constexpr int kEnvelopeBands = 16;

/// Mel-spaced centers of the timbre envelope bands, Hz.
const std::array<double, kEnvelopeBands>& envelope_band_centers();

struct SpeakerProfile {
  double f0 = 120.0;
  std::array<Formant, 3> formants{};
  double tilt = 0.8;       // one-pole source lowpass coefficient, higher is darker
  double noise_mix = 0.1;  // aspiration noise relative to the voiced source
  /// Smooth spectral coloration, dB per band (interpolated on the mel scale).
  std::array<double, kEnvelopeBands> envelope_db{};
  Gender gender = Gender::kA;

  /// 60 <= f0 <= 400, strictly increasing formant centers below 8 kHz,
  /// envelope gains within +-24 dB.
  void validate() const;
};

/// Tokens drive the per-segment (0.2 s) pitch and amplitude contour. A space
/// is a pause.
struct TokenSequence {
  std::string tokens;

  void validate() const;
};

inline constexpr int kSegmentSamples = 3200;

/// Stochastic variation applied on every synthesis call.
struct SynthesisJitter {
  double pitch = 0.0;         // max relative f0 deviation
  double formant = 0.0;       // max relative formant deviation
  double amplitude_noise = 0.0;  // std of the per-segment amplitude perturbation
  double envelope_db = 0.0;      // std of the per-band envelope perturbation
};

/// Source-filter synthesis: polyBLEP sawtooth source with spectral tilt and
/// aspiration noise, cascaded second-order formant resonators, a smooth
/// per-speaker spectral envelope, a low noise
/// floor, RMS normalization and clipping. Exactly `length` samples.
Waveform synthesize(const SpeakerProfile& profile, const TokenSequence& tokens, int length,
                    const SynthesisJitter& jitter, Rng& rng);

struct PopulationSpec {
  int num_speakers = 10;
  int utterances_per_speaker = 12;
  double gender_balance = 0.5;  // fraction of speakers in cluster B
  std::uint64_t seed = 1;
  std::string id_prefix = "spk";

  void validate() const;
};

/// A speaker with reproducible utterance recipes. Utterances are rendered on
/// demand from their seeds; populations of hundreds of speakers stay small.
struct Speaker {
  std::string id;
  SpeakerProfile profile;
  std::vector<std::uint64_t> utterance_seeds;
};

struct Population {
  PopulationSpec spec;
  std::vector<Speaker> speakers;

  std::size_t size() const { return speakers.size(); }
  /// Renders utterance `index` of speaker `speaker` (41280 samples).
  Waveform utterance(std::size_t speaker, std::size_t index) const;
  std::vector<std::size_t> speakers_of(Gender g) const;
};

/// Deterministic given spec.seed. Cluster A speakers draw f0 from a sub-range
/// of 85-165 Hz and cluster B from a sub-range of 165-255 Hz chosen so that
/// every realized utterance pitch stays within its cluster range.
Population generate_population(const PopulationSpec& spec);

/// Random content for one utterance.
TokenSequence random_tokens(Rng& rng, int segments);

/// Per-utterance variation used by generate_population.
inline constexpr SynthesisJitter kUtteranceJitter{0.03, 0.02, 0.0, 1.5};

/// Embedding-conditioned synthesizer standing in for a voice cloning system.
/// The embedding cube [0,1]^d is split into groups, one per profile
/// parameter; a parameter is the affine image of its group's mean.
class CloneModel {
 public:
  static constexpr int kDefaultDim = 32;

  explicit CloneModel(SynthesisJitter jitter = {0.02, 0.0, 0.1});

  int dim() const { return kDefaultDim; }
  const SynthesisJitter& jitter() const { return jitter_; }

  /// Affine map from the cube into SpeakerProfile ranges.
  SpeakerProfile decode(const Eigen::VectorXd& embedding) const;

  /// Fixed feature extractor (f0, formant-band energy centroids and peakiness,
  /// spectral tilt, harmonicity) squashed into [0,1]^d. Silent input maps to 0.5.
  Eigen::VectorXd get_speaker_embedding(const Waveform& w) const;

  /// Exactly max_len samples; rejects embeddings outside the cube.
  Waveform generate_speech(const TokenSequence& tokens, const Eigen::VectorXd& embedding,
                           int max_len, Rng& rng) const;

 private:
  SynthesisJitter jitter_;
};

/// Lower/upper bounds of each decoded parameter, in parameter order
/// (f0, F1, F2, F3, B1, B2, B3, tilt, noise_mix).
struct ParamRange {
  double lo;
  double hi;
};
const std::array<ParamRange, 9>& clone_param_ranges();
/// Embedding indices feeding each parameter.
const std::array<std::vector<int>, 9>& clone_param_groups();

/// Autocorrelation f0 estimate over voiced frames (median), 0 if unvoiced.
double estimate_f0(const Waveform& w);

}  // namespace mvforge::voicegen
