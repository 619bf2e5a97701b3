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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mvforge/audio.hpp"
#include "mvforge/rng.hpp"

namespace mvforge::encoder {

using audio::Matrix;
using audio::Waveform;

/// Unit-norm speaker embedding.
using Embedding = Eigen::VectorXd;

enum class InputKind { kSpectrogram, kFilterbank };

std::string to_string(InputKind kind);
InputKind input_kind_from_string(const std::string& s);

/// Waveform -> normalized acoustic features (frequency x frames).
struct FeatureFrontend {
  InputKind kind = InputKind::kSpectrogram;
  audio::StftConfig stft{};
  int bands = 24;

  int dim() const { return kind == InputKind::kSpectrogram ? stft.bins() : bands; }
  Matrix features(const Waveform& w) const;
  /// Only the spectrogram path is differentiated; filter banks are treated as
  /// an opaque front end and force black-box attacks.
  bool differentiable() const { return kind == InputKind::kSpectrogram; }
  /// dL/dw given dL/d(features).
  std::vector<double> backward(const Waveform& w, const Matrix& upstream) const;
};

/// affine -> tanh per frame, mean over time, affine, L2 normalization.
struct ToyEncoder {
  std::string arch_id;
  InputKind input_kind = InputKind::kSpectrogram;
  Matrix w1;           // hidden x input_dim
  Eigen::VectorXd b1;  // hidden
  Matrix w2;           // embed x hidden
  Eigen::VectorXd b2;  // embed
  Matrix head;         // classes x embed; empty outside training
  std::uint64_t init_seed = 0;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int embed_dim() const { return static_cast<int>(w2.rows()); }
  FeatureFrontend frontend() const;
};

/// Random initialization (Gaussian, fan-in scaled).
ToyEncoder make_encoder(const std::string& arch_id, InputKind kind, int input_dim, int hidden,
                        int embed, std::uint64_t seed);

/// The stock architectures: "spec-a" and "spec-b" read spectrograms and differ
/// in initialization and width; "fbank-x" reads 24-band filter banks.
ToyEncoder stock_encoder(const std::string& arch_id, int embed = 64, int hidden = 32,
                         std::uint64_t seed_offset = 0);
std::vector<std::string> stock_arch_ids();

Embedding encode(const ToyEncoder& enc, const Matrix& features);

/// Exact vector-Jacobian product: dL/d(features) given dL/d(embedding).
Matrix encode_backward(const ToyEncoder& enc, const Matrix& features, const Embedding& upstream);

inline double cosine(const Embedding& a, const Embedding& b) { return a.dot(b); }

struct TrainingSet {
  std::vector<Matrix> features;
  std::vector<int> labels;
  int num_classes = 0;
};

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 0.05;
  double logit_scale = 10.0;
};

struct TrainResult {
  ToyEncoder encoder;                // classification head removed
  std::vector<double> loss_history;  // mean cross-entropy per epoch
  double train_accuracy = 0.0;
};

/// Softmax classification over speaker identities with the embedding as the
/// penultimate layer; plain per-sample SGD in a shuffled order.
TrainResult train_encoder(const ToyEncoder& init, const TrainingSet& data, const TrainConfig& cfg,
                          Rng& rng);

/// JSON manifest: arch_id, input_kind, dims, init_seed and row-major matrices.
std::string to_json(const ToyEncoder& enc);
ToyEncoder from_json(const std::string& text);

/// Query facade for attacks. In black-box mode only similarity scores and
/// embeddings of submitted audio are observable.
class EncoderHandle {
 public:
  enum class Mode { kWhiteBox, kBlackBox };

  EncoderHandle(std::shared_ptr<const ToyEncoder> enc, Mode mode);

  Mode mode() const { return mode_; }
  const std::string& arch_id() const { return enc_->arch_id; }

  Embedding embed(const Waveform& w) const;
  Embedding embed_features(const Matrix& features) const;
  /// Mean cosine similarity of encode(w) to the batch.
  double score(const Waveform& w, std::span<const Embedding> batch) const;

  /// Both throw in black-box mode.
  const ToyEncoder& model() const;
  const FeatureFrontend& frontend() const;

 private:
  std::shared_ptr<const ToyEncoder> enc_;
  Mode mode_;
  FeatureFrontend frontend_;
};

double blackbox_score(const EncoderHandle& handle, const Waveform& w,
                      std::span<const Embedding> batch);

}  // namespace mvforge::encoder
