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

#include "mvforge/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "mvforge/errors.hpp"

namespace mvforge::encoder {
namespace {

using nlohmann::json;

struct Forward {
  Matrix hidden;            // tanh activations, hidden x frames
  Eigen::VectorXd pooled;   // hidden
  Eigen::VectorXd z;        // pre-normalization embedding
  double norm = 0.0;
  Embedding f;
};

void check_features(const ToyEncoder& enc, const Matrix& a) {
  require(a.rows() == enc.input_dim(),
          "feature dimension " + std::to_string(a.rows()) + " does not match encoder input " +
              std::to_string(enc.input_dim()));
  require(a.cols() >= 1, "features need at least one frame");
}

Forward forward(const ToyEncoder& enc, const Matrix& a) {
  check_features(enc, a);
  Forward fw;
  fw.hidden.noalias() = enc.w1 * a;
  fw.hidden.colwise() += enc.b1;
  fw.hidden = fw.hidden.array().tanh().matrix();
  fw.pooled = fw.hidden.rowwise().mean();
  fw.z = enc.w2 * fw.pooled + enc.b2;
  fw.norm = fw.z.norm();
  if (!(fw.norm > 0.0) || !std::isfinite(fw.norm)) throw_numerical("degenerate embedding norm");
  fw.f = fw.z / fw.norm;
  return fw;
}

// dL/dz from dL/df through f = z / |z|.
Eigen::VectorXd normalize_backward(const Forward& fw, const Embedding& upstream) {
  return (upstream - fw.f * fw.f.dot(upstream)) / fw.norm;
}

json matrix_to_json(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return flat;
}

Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto flat = j.get<std::vector<double>>();
  require(static_cast<Eigen::Index>(flat.size()) == rows * cols, "matrix size mismatch in encoder file");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<size_t>(r * cols + c)];
  }
  return m;
}

}  // namespace

std::string to_string(InputKind kind) {
  return kind == InputKind::kSpectrogram ? "spectrogram" : "filterbank";
}

InputKind input_kind_from_string(const std::string& s) {
  if (s == "spectrogram") return InputKind::kSpectrogram;
  if (s == "filterbank") return InputKind::kFilterbank;
  throw_precondition("unknown input kind '" + s + "'");
}

Matrix FeatureFrontend::features(const Waveform& w) const {
  if (kind == InputKind::kSpectrogram) return audio::feature_normalize(audio::spectrogram(w, stft).mag);
  return audio::feature_normalize(audio::filterbank(w, stft, bands).energies);
}

std::vector<double> FeatureFrontend::backward(const Waveform& w, const Matrix& upstream) const {
  require(differentiable(), "filter-bank front end is not differentiable; use a black-box attack");
  const Matrix mag = audio::spectrogram(w, stft).mag;
  return audio::spectrogram_backward(w, stft, audio::feature_normalize_backward(mag, upstream));
}

FeatureFrontend ToyEncoder::frontend() const {
  FeatureFrontend fe;
  fe.kind = input_kind;
  if (input_kind == InputKind::kFilterbank) fe.bands = input_dim();
  return fe;
}

ToyEncoder make_encoder(const std::string& arch_id, InputKind kind, int input_dim, int hidden,
                        int embed, std::uint64_t seed) {
  require(input_dim >= 1 && hidden >= 1 && embed >= 1, "encoder dimensions must be positive");
  Rng rng = make_rng(seed, 0xe1c0de);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ToyEncoder enc;
  enc.arch_id = arch_id;
  enc.input_kind = kind;
  enc.init_seed = seed;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  enc.w1 = Matrix::NullaryExpr(hidden, input_dim, [&] { return s1 * gauss(rng); });
  enc.b1 = Eigen::VectorXd::NullaryExpr(hidden, [&] { return 0.1 * gauss(rng); });
  enc.w2 = Matrix::NullaryExpr(embed, hidden, [&] { return s2 * gauss(rng); });
  enc.b2 = Eigen::VectorXd::NullaryExpr(embed, [&] { return 0.1 * gauss(rng); });
  return enc;
}

std::vector<std::string> stock_arch_ids() { return {"spec-a", "spec-b", "fbank-x"}; }

ToyEncoder stock_encoder(const std::string& arch_id, int embed, int hidden,
                         std::uint64_t seed_offset) {
  const audio::StftConfig stft;
  if (arch_id == "spec-a") {
    return make_encoder(arch_id, InputKind::kSpectrogram, stft.bins(), hidden, embed, 101 + seed_offset);
  }
  if (arch_id == "spec-b") {
    return make_encoder(arch_id, InputKind::kSpectrogram, stft.bins(), hidden + hidden / 2, embed,
                        202 + seed_offset);
  }
  if (arch_id == "fbank-x") {
    return make_encoder(arch_id, InputKind::kFilterbank, 24, hidden, embed, 303 + seed_offset);
  }
  throw_config("unknown encoder architecture '" + arch_id + "'");
}

Embedding encode(const ToyEncoder& enc, const Matrix& features) {
  return forward(enc, features).f;
}

Matrix encode_backward(const ToyEncoder& enc, const Matrix& features, const Embedding& upstream) {
  require(upstream.size() == enc.embed_dim(), "upstream gradient has the wrong dimension");
  const Forward fw = forward(enc, features);
  const Eigen::VectorXd g_pooled = enc.w2.transpose() * normalize_backward(fw, upstream);
  const double inv_t = 1.0 / static_cast<double>(features.cols());
  Matrix g_pre = (1.0 - fw.hidden.array().square()).matrix();
  g_pre.array().colwise() *= (g_pooled * inv_t).array();
  return enc.w1.transpose() * g_pre;
}

TrainResult train_encoder(const ToyEncoder& init, const TrainingSet& data, const TrainConfig& cfg,
                          Rng& rng) {
  require(data.num_classes >= 2, "training needs at least two speakers");
  require(data.features.size() == data.labels.size() && !data.features.empty(),
          "training features and labels must be non-empty and aligned");
  require(cfg.epochs >= 1 && cfg.learning_rate > 0.0, "invalid training configuration");
  for (int label : data.labels) {
    require(label >= 0 && label < data.num_classes, "training label out of range");
  }

  ToyEncoder enc = init;
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double hs = 1.0 / std::sqrt(static_cast<double>(enc.embed_dim()));
  enc.head = Matrix::NullaryExpr(data.num_classes, enc.embed_dim(), [&] { return hs * gauss(rng); });

  TrainResult result;
  std::vector<std::size_t> order(data.features.size());
  std::iota(order.begin(), order.end(), 0);
  const double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      const Matrix& a = data.features[idx];
      const int label = data.labels[idx];
      const Forward fw = forward(enc, a);

      Eigen::VectorXd logits = cfg.logit_scale * (enc.head * fw.f);
      const double mx = logits.maxCoeff();
      Eigen::VectorXd prob = (logits.array() - mx).exp().matrix();
      const double zsum = prob.sum();
      prob /= zsum;
      total += -(logits[label] - mx - std::log(zsum));
      if (!std::isfinite(total)) throw_numerical("training loss diverged");

      Eigen::VectorXd g_logits = prob;
      g_logits[label] -= 1.0;
      g_logits *= cfg.logit_scale;
      const Eigen::VectorXd g_f = enc.head.transpose() * g_logits;
      const Eigen::VectorXd g_z = normalize_backward(fw, g_f);
      const Eigen::VectorXd g_pooled = enc.w2.transpose() * g_z;
      const double inv_t = 1.0 / static_cast<double>(a.cols());
      Matrix g_pre = (1.0 - fw.hidden.array().square()).matrix();
      g_pre.array().colwise() *= (g_pooled * inv_t).array();

      enc.head.noalias() -= lr * g_logits * fw.f.transpose();
      enc.w2.noalias() -= lr * g_z * fw.pooled.transpose();
      enc.b2 -= lr * g_z;
      enc.w1.noalias() -= lr * g_pre * a.transpose();
      enc.b1 -= lr * g_pre.rowwise().sum();
    }
    result.loss_history.push_back(total / static_cast<double>(order.size()));
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    const Embedding f = encode(enc, data.features[i]);
    Eigen::Index best = 0;
    (enc.head * f).maxCoeff(&best);
    if (best == data.labels[i]) ++correct;
  }
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(data.features.size());
  enc.head.resize(0, 0);
  result.encoder = std::move(enc);
  return result;
}

std::string to_json(const ToyEncoder& enc) {
  json j;
  j["format"] = "mvforge-encoder";
  j["version"] = 1;
  j["arch_id"] = enc.arch_id;
  j["input_kind"] = to_string(enc.input_kind);
  j["input_dim"] = enc.input_dim();
  j["hidden_dim"] = enc.hidden_dim();
  j["embed_dim"] = enc.embed_dim();
  j["init_seed"] = enc.init_seed;
  j["w1"] = matrix_to_json(enc.w1);
  j["b1"] = std::vector<double>(enc.b1.data(), enc.b1.data() + enc.b1.size());
  j["w2"] = matrix_to_json(enc.w2);
  j["b2"] = std::vector<double>(enc.b2.data(), enc.b2.data() + enc.b2.size());
  return j.dump();
}

ToyEncoder from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_precondition(std::string("malformed encoder file: ") + e.what());
  }
  require(j.value("format", "") == "mvforge-encoder", "not an mvforge encoder file");
  ToyEncoder enc;
  try {
    enc.arch_id = j.at("arch_id").get<std::string>();
    enc.input_kind = input_kind_from_string(j.at("input_kind").get<std::string>());
    const int k = j.at("input_dim").get<int>();
    const int h = j.at("hidden_dim").get<int>();
    const int e = j.at("embed_dim").get<int>();
    enc.init_seed = j.at("init_seed").get<std::uint64_t>();
    enc.w1 = matrix_from_json(j.at("w1"), h, k);
    enc.w2 = matrix_from_json(j.at("w2"), e, h);
    const auto b1 = j.at("b1").get<std::vector<double>>();
    const auto b2 = j.at("b2").get<std::vector<double>>();
    require(static_cast<int>(b1.size()) == h && static_cast<int>(b2.size()) == e,
            "bias size mismatch in encoder file");
    enc.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), h);
    enc.b2 = Eigen::Map<const Eigen::VectorXd>(b2.data(), e);
  } catch (const json::exception& ex) {
    throw_precondition(std::string("malformed encoder file: ") + ex.what());
  }
  require(enc.w1.allFinite() && enc.w2.allFinite() && enc.b1.allFinite() && enc.b2.allFinite(),
          "encoder file has non-finite weights");
  return enc;
}

EncoderHandle::EncoderHandle(std::shared_ptr<const ToyEncoder> enc, Mode mode)
    : enc_(std::move(enc)), mode_(mode) {
  require(enc_ != nullptr, "encoder handle needs an encoder");
  frontend_ = enc_->frontend();
}

Embedding EncoderHandle::embed(const Waveform& w) const {
  return encode(*enc_, frontend_.features(w));
}

Embedding EncoderHandle::embed_features(const Matrix& features) const {
  return encode(*enc_, features);
}

double EncoderHandle::score(const Waveform& w, std::span<const Embedding> batch) const {
  require(!batch.empty(), "score batch is empty");
  const Embedding f = embed(w);
  double total = 0.0;
  for (const auto& b : batch) total += cosine(f, b);
  return total / static_cast<double>(batch.size());
}

const ToyEncoder& EncoderHandle::model() const {
  require(mode_ == Mode::kWhiteBox, "black-box encoder does not expose its parameters");
  return *enc_;
}

const FeatureFrontend& EncoderHandle::frontend() const {
  require(mode_ == Mode::kWhiteBox, "black-box encoder does not expose its front end");
  return frontend_;
}

double blackbox_score(const EncoderHandle& handle, const Waveform& w,
                      std::span<const Embedding> batch) {
  return handle.score(w, batch);
}

}  // namespace mvforge::encoder
