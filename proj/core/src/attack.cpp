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

#include "mvforge/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mvforge/errors.hpp"

namespace mvforge::attack {
namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kPlaybackStream = 2;
constexpr std::uint64_t kQueryStream = 3;
constexpr std::uint64_t kNesStream = 4;
constexpr std::uint64_t kMonitorStream = 5;
constexpr std::uint64_t kFinalStream = 6;

using audio::Matrix;

Eigen::VectorXd batch_mean(std::span<const Embedding> batch) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(batch.front().size());
  for (const auto& e : batch) m += e;
  return m / static_cast<double>(batch.size());
}

Eigen::Map<const Eigen::VectorXd> as_vector(const Matrix& m) {
  return {m.data(), m.size()};
}

// Shared state of one optimization run.
class Run {
 public:
  Run(const Waveform& seed, std::span<const Embedding> targets, const EncoderHandle& encoder,
      const AttackConfig& cfg, const Monitor& monitor, const AttackResources& resources)
      : seed_(seed), encoder_(encoder), cfg_(cfg), monitor_(monitor), resources_(resources),
        targets_(targets.begin(), targets.end()) {
    cfg.validate();
    seed.validate();
    require(!targets_.empty(), "attack needs at least one target embedding");
    require(monitor.gallery != nullptr && !monitor.gallery->empty(),
            "attack monitor needs a non-empty gallery");
    monitor.policy.validate();
    if (cfg.playback_augment) {
      require(cfg.domain != Domain::kSpectrogram,
              "playback augmentation needs a waveform generator; the spectrogram domain bypasses it");
      require(resources.playback != nullptr, "playback augmentation needs playback kernels");
      resources.playback->validate();
    }
    if (cfg.domain == Domain::kSpectrogram) {
      base_magnitude_ = audio::spectrogram(seed).mag;
    }
    if (cfg.domain == Domain::kClone) {
      require(resources.clone != nullptr, "the clone domain needs a clone model");
      resources.prompt.validate();
    }
    Rng shuffle = make_rng(cfg.seed, kShuffleStream);
    std::shuffle(targets_.begin(), targets_.end(), shuffle);
  }

  const Waveform& seed() const { return seed_; }
  const AttackConfig& cfg() const { return cfg_; }
  const AttackResources& resources() const { return resources_; }
  const EncoderHandle& encoder() const { return encoder_; }
  const Matrix& base_magnitude() const { return base_magnitude_; }

  Eigen::VectorXd initial_vector() const {
    switch (cfg_.domain) {
      case Domain::kWaveform:
        return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(seed_.size()));
      case Domain::kSpectrogram:
        return Eigen::VectorXd::Zero(base_magnitude_.size());
      case Domain::kClone:
        return resources_.clone->get_speaker_embedding(seed_);
    }
    return {};
  }

  // Embedding of the attack sample as deployed, without playback.
  Embedding current_embedding(const Eigen::VectorXd& v) const {
    switch (cfg_.domain) {
      case Domain::kWaveform:
        return encoder_.embed(apply_waveform(seed_, v));
      case Domain::kSpectrogram:
        return encoder_.embed_features(audio::feature_normalize(apply_spectrogram(base_magnitude_, v)));
      case Domain::kClone: {
        Rng rng = make_rng(cfg_.seed, kMonitorStream);
        return encoder_.embed(apply_clone(*resources_.clone, resources_.prompt, v, rng));
      }
    }
    return {};
  }

  double monitor_ir(const Eigen::VectorXd& v) const {
    const Embedding f = current_embedding(v);
    return verification::impersonation_rate(std::span<const Embedding>(&f, 1), *monitor_.gallery,
                                            monitor_.policy);
  }

  void project(Eigen::VectorXd& v, const Eigen::VectorXd& v0) const {
    if (cfg_.norm_mode == NormMode::kLinfSign) {
      const double eps = cfg_.linf_budget;
      v = v0 + (v - v0).cwiseMax(-eps).cwiseMin(eps);
    }
    if (cfg_.domain == Domain::kClone) v = v.cwiseMax(0.0).cwiseMin(1.0);
  }

  // step(v, batch, step_index, objective_out) -> raw ascent direction.
  using Step = std::function<Eigen::VectorXd(const Eigen::VectorXd&, std::span<const Embedding>,
                                             std::uint64_t, double&)>;

  MasterVoice optimize(const Step& step) {
    const Eigen::VectorXd v0 = initial_vector();
    Eigen::VectorXd v = v0;
    MasterVoice mv;
    mv.domain = cfg_.domain;
    mv.seed_ir = monitor_ir(v);
    const std::size_t bs = static_cast<std::size_t>(cfg_.batch_size);
    std::uint64_t step_index = 0;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      double objective_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < targets_.size(); start += bs) {
        const std::size_t len = std::min(bs, targets_.size() - start);
        const std::span<const Embedding> batch(targets_.data() + start, len);
        double objective = 0.0;
        const Eigen::VectorXd g = step(v, batch, step_index++, objective);
        if (!std::isfinite(objective)) throw_numerical("attack objective became non-finite");
        objective_sum += objective;
        ++batches;
        if (cfg_.step_size > 0.0) {
          v += cfg_.step_size * normalize_gradient(g, cfg_.norm_mode);
          project(v, v0);
        }
      }
      mv.objective_history.push_back(objective_sum / static_cast<double>(batches));
      mv.ir_history.push_back(monitor_ir(v));
    }
    Rng final_rng = make_rng(cfg_.seed, kFinalStream);
    mv.waveform = apply_domain(cfg_.domain, seed_, v, resources_, cfg_.griffin_lim_iters, final_rng);
    mv.attack_vector = std::move(v);
    mv.distortion_snr = audio::snr_db(seed_, mv.waveform);
    return mv;
  }

 private:
  const Waveform& seed_;
  const EncoderHandle& encoder_;
  AttackConfig cfg_;
  Monitor monitor_;
  AttackResources resources_;
  std::vector<Embedding> targets_;
  Matrix base_magnitude_;
};

}  // namespace

std::string to_string(Domain d) {
  switch (d) {
    case Domain::kWaveform:
      return "waveform";
    case Domain::kSpectrogram:
      return "spectrogram";
    case Domain::kClone:
      return "clone";
  }
  return "waveform";
}

Domain domain_from_string(const std::string& s) {
  if (s == "waveform") return Domain::kWaveform;
  if (s == "spectrogram") return Domain::kSpectrogram;
  if (s == "clone") return Domain::kClone;
  throw_config("unknown attack domain '" + s + "' (expected waveform, spectrogram or clone)");
}

std::string to_string(NormMode m) { return m == NormMode::kL2 ? "l2" : "linf_sign"; }

NormMode norm_mode_from_string(const std::string& s) {
  if (s == "l2") return NormMode::kL2;
  if (s == "linf_sign") return NormMode::kLinfSign;
  throw_config("unknown gradient norm mode '" + s + "' (expected l2 or linf_sign)");
}

void AttackConfig::validate() const {
  require(std::isfinite(step_size) && step_size >= 0.0, "attack step size must be >= 0");
  require(epochs >= 1, "attack needs at least one epoch");
  require(batch_size >= 1, "attack batch size must be >= 1");
  require(norm_mode != NormMode::kLinfSign || linf_budget > 0.0,
          "LinfSign mode needs a positive budget");
  require(griffin_lim_iters >= 1, "Griffin-Lim needs at least one iteration");
}

void NesConfig::validate() const {
  require(samples >= 1, "NES needs at least one sample");
  require(std::isfinite(sigma) && sigma > 0.0, "NES sigma must be > 0");
}

double similarity_objective(const Embedding& f, std::span<const Embedding> batch) {
  require(!batch.empty(), "similarity objective needs a non-empty batch");
  double total = 0.0;
  for (const auto& e : batch) {
    require(e.size() == f.size(), "embedding dimensions differ");
    total += encoder::cosine(f, e);
  }
  return total / static_cast<double>(batch.size());
}

Eigen::VectorXd normalize_gradient(const Eigen::VectorXd& g, NormMode mode) {
  if (!g.allFinite()) throw_numerical("gradient has non-finite components");
  if (mode == NormMode::kLinfSign) {
    return g.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
  }
  const double norm = g.norm();
  if (norm == 0.0) return Eigen::VectorXd::Zero(g.size());
  return g / norm;
}

Waveform apply_waveform(const Waveform& seed, const Eigen::VectorXd& v) {
  require(static_cast<std::size_t>(v.size()) == seed.size(),
          "waveform perturbation length does not match the seed");
  Waveform out{std::vector<double>(seed.size()), seed.sample_rate};
  for (std::size_t i = 0; i < seed.size(); ++i) {
    out.samples[i] = std::clamp(seed.samples[i] + v[static_cast<Eigen::Index>(i)], -1.0, 1.0);
  }
  return out;
}

Matrix apply_spectrogram(const Matrix& base_magnitude, const Eigen::VectorXd& v) {
  require(v.size() == base_magnitude.size(), "spectrogram perturbation shape does not match");
  Matrix out = base_magnitude;
  Eigen::Map<Eigen::VectorXd>(out.data(), out.size()) =
      (as_vector(base_magnitude) + v).cwiseMax(0.0);
  return out;
}

Waveform apply_clone(const voicegen::CloneModel& model, const voicegen::TokenSequence& prompt,
                     const Eigen::VectorXd& v, Rng& rng) {
  require(v.size() == model.dim(), "clone embedding has the wrong dimension");
  return model.generate_speech(prompt, v.cwiseMax(0.0).cwiseMin(1.0), audio::kStandardLength, rng);
}

Waveform apply_domain(Domain domain, const Waveform& seed, const Eigen::VectorXd& v,
                      const AttackResources& resources, int griffin_lim_iters, Rng& rng) {
  switch (domain) {
    case Domain::kWaveform:
      return apply_waveform(seed, v);
    case Domain::kSpectrogram: {
      const audio::Spectrogram base = audio::spectrogram(seed);
      const audio::Spectrogram target{apply_spectrogram(base.mag, v), base.config};
      Waveform out = audio::griffin_lim(target, griffin_lim_iters, rng);
      out.samples.resize(seed.size(), 0.0);
      return out;
    }
    case Domain::kClone:
      require(resources.clone != nullptr, "the clone domain needs a clone model");
      return apply_clone(*resources.clone, resources.prompt, v, rng);
  }
  throw_precondition("unknown attack domain");
}

Eigen::VectorXd nes_gradient(const NesObjective& objective, const Eigen::VectorXd& x,
                             const NesConfig& nes, Rng& rng) {
  nes.validate();
  require(x.allFinite(), "NES point has non-finite components");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd delta(x.size());
  for (int i = 0; i < nes.samples; ++i) {
    for (Eigen::Index j = 0; j < delta.size(); ++j) delta[j] = gauss(rng);
    const auto stream = static_cast<std::uint64_t>(i);
    const double plus = objective(x + nes.sigma * delta, stream);
    const double minus = objective(x - nes.sigma * delta, stream);
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw_numerical("NES objective returned a non-finite value");
    }
    g += (plus - minus) * delta;
  }
  return g / (2.0 * nes.samples * nes.sigma);
}

Eigen::VectorXd nes_gradient(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& x, const NesConfig& nes, Rng& rng) {
  return nes_gradient([&](const Eigen::VectorXd& p, std::uint64_t) { return objective(p); }, x, nes,
                      rng);
}

MasterVoice whitebox_optimize(const Waveform& seed, std::span<const Embedding> targets,
                              const EncoderHandle& encoder, const AttackConfig& cfg,
                              const Monitor& monitor, const AttackResources& resources) {
  require(cfg.domain != Domain::kClone,
          "the clone synthesizer has no analytic gradient; use blackbox_optimize");
  const encoder::ToyEncoder& model = encoder.model();
  const encoder::FeatureFrontend& frontend = encoder.frontend();
  require(frontend.differentiable(),
          "encoder '" + model.arch_id + "' has no differentiable front end; use blackbox_optimize");
  Run run(seed, targets, encoder, cfg, monitor, resources);
  Rng playback_rng = make_rng(cfg.seed, kPlaybackStream);

  if (cfg.domain == Domain::kSpectrogram) {
    return run.optimize([&](const Eigen::VectorXd& v, std::span<const Embedding> batch,
                            std::uint64_t, double& objective) -> Eigen::VectorXd {
      const Matrix mag = apply_spectrogram(run.base_magnitude(), v);
      const Matrix feats = audio::feature_normalize(mag);
      const Eigen::VectorXd target = batch_mean(batch);
      objective = encoder::encode(model, feats).dot(target);
      Matrix g = audio::feature_normalize_backward(mag, encoder::encode_backward(model, feats, target));
      const auto active = (as_vector(run.base_magnitude()) + v).array() > 0.0;
      return active.select(as_vector(g), 0.0);
    });
  }

  return run.optimize([&](const Eigen::VectorXd& v, std::span<const Embedding> batch,
                          std::uint64_t, double& objective) -> Eigen::VectorXd {
    const Waveform x = apply_waveform(seed, v);
    PlaybackDraw draw;
    Waveform heard = x;
    if (cfg.playback_augment) {
      draw = draw_playback(*resources.playback, playback_rng);
      heard = playback(x, *resources.playback, draw);
    }
    const Matrix mag = audio::spectrogram(heard, frontend.stft).mag;
    const Matrix feats = audio::feature_normalize(mag);
    const Eigen::VectorXd target = batch_mean(batch);
    objective = encoder::encode(model, feats).dot(target);
    const Matrix g_mag =
        audio::feature_normalize_backward(mag, encoder::encode_backward(model, feats, target));
    std::vector<double> g = audio::spectrogram_backward(heard, frontend.stft, g_mag);
    if (cfg.playback_augment) g = playback_backward(x, *resources.playback, draw, g);
    Eigen::VectorXd out(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double pre = seed.samples[i] + v[static_cast<Eigen::Index>(i)];
      out[static_cast<Eigen::Index>(i)] = (pre < -1.0 || pre > 1.0) ? 0.0 : g[i];
    }
    return out;
  });
}

MasterVoice blackbox_optimize(const Waveform& seed, std::span<const Embedding> targets,
                              const EncoderHandle& encoder, const AttackConfig& cfg,
                              const NesConfig& nes, const Monitor& monitor,
                              const AttackResources& resources) {
  nes.validate();
  Run run(seed, targets, encoder, cfg, monitor, resources);
  Rng playback_rng = make_rng(cfg.seed, kPlaybackStream);
  Rng nes_rng = make_rng(cfg.seed, kNesStream);
  const std::uint64_t query_seed = mix_seed(cfg.seed, kQueryStream);

  return run.optimize([&](const Eigen::VectorXd& v, std::span<const Embedding> batch,
                          std::uint64_t step, double& objective) -> Eigen::VectorXd {
    PlaybackDraw draw;
    if (cfg.playback_augment) draw = draw_playback(*resources.playback, playback_rng);
    auto query = [&](const Eigen::VectorXd& x, std::uint64_t stream) -> double {
      switch (cfg.domain) {
        case Domain::kSpectrogram: {
          const Matrix feats = audio::feature_normalize(apply_spectrogram(run.base_magnitude(), x));
          return similarity_objective(encoder.embed_features(feats), batch);
        }
        case Domain::kWaveform:
        case Domain::kClone: {
          Waveform w;
          if (cfg.domain == Domain::kWaveform) {
            w = apply_waveform(seed, x);
          } else {
            Rng rng = make_rng(mix_seed(query_seed, step), stream);
            w = apply_clone(*resources.clone, resources.prompt, x, rng);
          }
          if (cfg.playback_augment) w = playback(w, *resources.playback, draw);
          return encoder::blackbox_score(encoder, w, batch);
        }
      }
      throw_precondition("unknown attack domain");
    };
    // The reported objective uses the stream after the last NES pair.
    objective = query(v, static_cast<std::uint64_t>(nes.samples));
    if (cfg.step_size == 0.0) return Eigen::VectorXd::Zero(v.size());
    return nes_gradient(query, v, nes, nes_rng);
  });
}

}  // namespace mvforge::attack
