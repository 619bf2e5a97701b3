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

#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "mvforge/attack.hpp"
#include "mvforge/errors.hpp"

namespace mvforge::attack {
namespace {

constexpr int kLength = 4000;

Waveform noise_wave(std::uint64_t seed, double amp = 0.1, int length = kLength) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  std::vector<double> s(static_cast<std::size_t>(length));
  for (auto& v : s) v = u(rng);
  return Waveform(std::move(s));
}

std::vector<Embedding> random_units(int count, int dim, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g;
  std::vector<Embedding> out;
  for (int i = 0; i < count; ++i) out.push_back(Embedding::NullaryExpr(dim, [&] { return g(rng); }).normalized());
  return out;
}

// Stock spec-a encoder, a gallery and targets in its embedding space.
class AttackFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    model_ = std::make_shared<encoder::ToyEncoder>(encoder::stock_encoder("spec-a", 16, 8));
    white_ = std::make_unique<EncoderHandle>(model_, EncoderHandle::Mode::kWhiteBox);
    black_ = std::make_unique<EncoderHandle>(model_, EncoderHandle::Mode::kBlackBox);
    seed_ = noise_wave(1);
    for (int i = 0; i < 6; ++i) targets_.push_back(white_->embed(noise_wave(100 + i, 0.3)));
    const auto users = random_units(12, 16, 7);
    for (int u = 0; u < 4; ++u) {
      gallery_.enroll("u" + std::to_string(u), {users[3 * u], users[3 * u + 1], users[3 * u + 2]});
    }
    monitor_ = {&gallery_, {verification::ScoringRule::kAny, 3, 0.0}};
  }

  AttackConfig config(int epochs = 3) const {
    AttackConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 3;
    cfg.step_size = 0.01;
    cfg.seed = 11;
    return cfg;
  }

  std::shared_ptr<encoder::ToyEncoder> model_;
  std::unique_ptr<EncoderHandle> white_;
  std::unique_ptr<EncoderHandle> black_;
  Waveform seed_;
  std::vector<Embedding> targets_;
  verification::Gallery gallery_{3};
  Monitor monitor_;
};

TEST(Objective, MeanCosine) {
  const auto e = random_units(4, 5, 2);
  const std::vector<Embedding> batch(e.begin() + 1, e.end());
  const double expect = (e[0].dot(e[1]) + e[0].dot(e[2]) + e[0].dot(e[3])) / 3.0;
  EXPECT_NEAR(similarity_objective(e[0], batch), expect, 1e-15);
  EXPECT_NEAR(similarity_objective(e[0], std::span<const Embedding>(e.data(), 1)), 1.0, 1e-12);
}

TEST(NormalizeGradient, Modes) {
  Eigen::VectorXd g(3);
  g << 3.0, -4.0, 0.0;
  EXPECT_LE((normalize_gradient(g, NormMode::kL2) - Eigen::Vector3d(0.6, -0.8, 0.0)).norm(), 1e-15);
  EXPECT_EQ(normalize_gradient(g, NormMode::kLinfSign), Eigen::Vector3d(1.0, -1.0, 0.0));
  EXPECT_EQ(normalize_gradient(Eigen::VectorXd::Zero(3), NormMode::kL2), Eigen::VectorXd::Zero(3));
}

TEST(ApplyDomain, WaveformAndSpectrogram) {
  const Waveform seed(std::vector<double>{0.5, -0.5, 0.9});
  Eigen::VectorXd v(3);
  v << 0.2, -0.7, 0.05;
  const Waveform out = apply_waveform(seed, v);
  EXPECT_NEAR(out.samples[0], 0.7, 1e-15);
  EXPECT_EQ(out.samples[1], -1.0);
  EXPECT_NEAR(out.samples[2], 0.95, 1e-15);
  Rng rng = make_rng(0);
  EXPECT_EQ(apply_domain(Domain::kWaveform, seed, v, {}, 0, rng).samples,
            apply_waveform(seed, v).samples);

  audio::Matrix base(2, 2);
  base << 1.0, 0.5, 0.2, 0.0;
  Eigen::VectorXd dv(4);
  dv << -2.0, 0.1, 0.3, 0.4;  // column-major: (0,0), (1,0), (0,1), (1,1)
  const audio::Matrix m = apply_spectrogram(base, dv);
  EXPECT_EQ(m(0, 0), 0.0);
  EXPECT_NEAR(m(1, 0), 0.3, 1e-15);
  EXPECT_NEAR(m(0, 1), 0.8, 1e-15);
  EXPECT_NEAR(m(1, 1), 0.4, 1e-15);
}

TEST(ApplyDomain, SpectrogramKeepsSeedLength) {
  const Waveform seed = noise_wave(3, 0.2, 3000);
  const audio::Spectrogram s = audio::spectrogram(seed);
  Rng rng = make_rng(1);
  const Waveform out = apply_domain(Domain::kSpectrogram, seed, Eigen::VectorXd::Zero(s.mag.size()),
                                    {}, 5, rng);
  EXPECT_EQ(out.size(), seed.size());
  EXPECT_NO_THROW(out.validate());
}

TEST(Config, Validation) {
  AttackConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.step_size = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.norm_mode = NormMode::kLinfSign;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_THROW(domain_from_string("pixels"), Error);
  EXPECT_EQ(domain_from_string(to_string(Domain::kClone)), Domain::kClone);
  EXPECT_EQ(norm_mode_from_string(to_string(NormMode::kLinfSign)), NormMode::kLinfSign);
  EXPECT_THROW((NesConfig{0, 0.001}.validate()), Error);
}

TEST(Nes, ConstantObjectiveGivesZero) {
  Rng rng = make_rng(4);
  const auto g = nes_gradient([](const Eigen::VectorXd&) { return 0.25; },
                              Eigen::VectorXd::Ones(10), {50, 0.01}, rng);
  EXPECT_EQ(g, Eigen::VectorXd::Zero(10));
}

TEST(Nes, LinearObjectiveRecoversDirection) {
  Eigen::VectorXd a(8);
  a << 1, -2, 0.5, 3, 0, -1, 2, 1;
  Rng rng = make_rng(5);
  const auto g = nes_gradient([&](const Eigen::VectorXd& x) { return a.dot(x); },
                              Eigen::VectorXd::Zero(8), {2000, 0.001}, rng);
  EXPECT_GE(g.dot(a) / (g.norm() * a.norm()), 0.97);
}

TEST(Nes, QuadraticMatchesAnalyticGradient) {
  Rng rng = make_rng(6);
  std::normal_distribution<double> gauss;
  const Eigen::VectorXd c = Eigen::VectorXd::NullaryExpr(10, [&] { return gauss(rng); });
  const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(10, [&] { return gauss(rng); });
  const auto g = nes_gradient([&](const Eigen::VectorXd& p) { return -(p - c).squaredNorm(); }, x,
                              {2000, 0.001}, rng);
  const Eigen::VectorXd expect = -2.0 * (x - c);
  EXPECT_GE(g.dot(expect) / (g.norm() * expect.norm()), 0.97);
}

TEST(Nes, PairsShareTheirStream) {
  Rng rng = make_rng(7);
  std::vector<std::uint64_t> seen;
  nes_gradient(
      [&](const Eigen::VectorXd&, std::uint64_t stream) {
        seen.push_back(stream);
        return 0.0;
      },
      Eigen::VectorXd::Zero(2), {3, 0.1}, rng);
  EXPECT_EQ(seen, (std::vector<std::uint64_t>{0, 0, 1, 1, 2, 2}));
  EXPECT_THROW(nes_gradient([](const Eigen::VectorXd&) { return NAN; }, Eigen::VectorXd::Zero(2),
                            {3, 0.1}, rng),
               Error);
}

TEST(Playback, IdentityIsBitExact) {
  const Waveform w = noise_wave(8, 0.9);
  Rng rng = make_rng(9);
  EXPECT_EQ(playback(w, PlaybackKernels::identity(), rng).samples, w.samples);
}

TEST(Playback, DelayedKernelsShift) {
  PlaybackKernels k = PlaybackKernels::identity();
  k.room_irs = {{0.0, 0.0, 0.0, 1.0}};
  const Waveform w = noise_wave(10, 0.5, 100);
  Rng rng = make_rng(0);
  const Waveform out = playback(w, k, rng);
  ASSERT_EQ(out.size(), w.size());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out.samples[i], 0.0);
  for (std::size_t i = 3; i < w.size(); ++i) EXPECT_EQ(out.samples[i], w.samples[i - 3]);
}

TEST(Playback, SyntheticKernelsAreValidAndDeterministic) {
  const PlaybackKernels a = PlaybackKernels::synthetic(3);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.speaker_irs.size(), 4u);
  EXPECT_EQ(a.room_irs.size(), 9u);
  EXPECT_EQ(a.mic_irs.size(), 7u);
  EXPECT_EQ(PlaybackKernels::synthetic(3).room_irs, a.room_irs);
  const Waveform w = noise_wave(11, 0.5);
  Rng r1 = make_rng(2), r2 = make_rng(2);
  const Waveform o1 = playback(w, a, r1);
  EXPECT_EQ(o1.samples, playback(w, a, r2).samples);
  EXPECT_EQ(o1.size(), w.size());
  EXPECT_NO_THROW(o1.validate());

  PlaybackKernels bad = a;
  bad.mic_irs.clear();
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Playback, CorrelateIsAdjointOfConvolve) {
  const Waveform x = noise_wave(12, 1.0, 300), y = noise_wave(13, 1.0, 300);
  const std::vector<double> h = noise_wave(14, 1.0, 40).samples;
  const auto cx = convolve_same(x.samples, h);
  const auto cy = correlate_same(y.samples, h);
  const double lhs = std::inner_product(cx.begin(), cx.end(), y.samples.begin(), 0.0);
  const double rhs = std::inner_product(x.samples.begin(), x.samples.end(), cy.begin(), 0.0);
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs) + 1e-12);
}

TEST(Playback, BackwardMatchesFiniteDifferences) {
  PlaybackKernels k = PlaybackKernels::synthetic(5);
  const Waveform w = noise_wave(15, 0.05, 400);
  const PlaybackDraw draw{1, 2, 3, 0.0, 0};
  const std::vector<double> up = noise_wave(16, 1.0, 400).samples;
  const auto grad = playback_backward(w, k, draw, up);
  auto loss = [&](const Waveform& x) {
    const auto y = playback(x, k, draw).samples;
    return std::inner_product(y.begin(), y.end(), up.begin(), 0.0);
  };
  const double h = 1e-6;
  for (std::size_t i : {0u, 17u, 200u, 399u}) {
    Waveform p = w, m = w;
    p.samples[i] += h;
    m.samples[i] -= h;
    EXPECT_NEAR((loss(p) - loss(m)) / (2 * h), grad[i], 1e-6);
  }
}

TEST_F(AttackFixture, ZeroStepLeavesSeedUnchanged) {
  AttackConfig cfg = config();
  cfg.step_size = 0.0;
  const MasterVoice mv = whitebox_optimize(seed_, targets_, *white_, cfg, monitor_);
  EXPECT_EQ(mv.waveform.samples, seed_.samples);
  ASSERT_EQ(mv.ir_history.size(), 3u);
  for (double ir : mv.ir_history) EXPECT_EQ(ir, mv.seed_ir);
  EXPECT_TRUE(std::isinf(mv.distortion_snr));
}

TEST_F(AttackFixture, WhiteBoxRaisesObjective) {
  const MasterVoice mv = whitebox_optimize(seed_, targets_, *white_, config(6), monitor_);
  ASSERT_EQ(mv.objective_history.size(), 6u);
  EXPECT_GT(mv.objective_history.back(), mv.objective_history.front());
  EXPECT_EQ(mv.waveform.size(), seed_.size());
  EXPECT_NO_THROW(mv.waveform.validate());
  EXPECT_TRUE(std::isfinite(mv.distortion_snr));
}

TEST_F(AttackFixture, SpectrogramDomainRaisesObjective) {
  AttackConfig cfg = config(6);
  cfg.domain = Domain::kSpectrogram;
  cfg.step_size = 0.5;
  cfg.griffin_lim_iters = 4;
  const MasterVoice mv = whitebox_optimize(seed_, targets_, *white_, cfg, monitor_);
  EXPECT_GT(mv.objective_history.back(), mv.objective_history.front());
  EXPECT_EQ(mv.waveform.size(), seed_.size());
}

TEST_F(AttackFixture, LinfBudgetBoundsPerturbation) {
  AttackConfig cfg = config(4);
  cfg.norm_mode = NormMode::kLinfSign;
  cfg.step_size = 0.004;
  cfg.linf_budget = 0.006;
  const MasterVoice mv = whitebox_optimize(seed_, targets_, *white_, cfg, monitor_);
  double worst = 0.0;
  for (std::size_t i = 0; i < seed_.size(); ++i) {
    worst = std::max(worst, std::abs(mv.waveform.samples[i] - seed_.samples[i]));
  }
  EXPECT_LE(worst, 0.006 + 1e-12);
  EXPECT_GT(worst, 0.0);
}

TEST_F(AttackFixture, IdentityPlaybackMatchesPlainTrajectory) {
  const PlaybackKernels identity = PlaybackKernels::identity();
  AttackConfig cfg = config();
  const MasterVoice plain = whitebox_optimize(seed_, targets_, *white_, cfg, monitor_);
  cfg.playback_augment = true;
  const MasterVoice aug = whitebox_optimize(seed_, targets_, *white_, cfg, monitor_, {&identity});
  EXPECT_EQ(aug.waveform.samples, plain.waveform.samples);
  EXPECT_EQ(aug.objective_history, plain.objective_history);
}

TEST_F(AttackFixture, AugmentationRequirements) {
  AttackConfig cfg = config(1);
  cfg.playback_augment = true;
  EXPECT_THROW(whitebox_optimize(seed_, targets_, *white_, cfg, monitor_), Error);
  const PlaybackKernels identity = PlaybackKernels::identity();
  cfg.domain = Domain::kSpectrogram;
  EXPECT_THROW(whitebox_optimize(seed_, targets_, *white_, cfg, monitor_, {&identity}), Error);
}

TEST_F(AttackFixture, RejectsBadInputs) {
  const AttackConfig cfg = config(1);
  EXPECT_THROW(whitebox_optimize(seed_, {}, *white_, cfg, monitor_), Error);
  const verification::Gallery empty(3);
  EXPECT_THROW(whitebox_optimize(seed_, targets_, *white_, cfg, {&empty, monitor_.policy}), Error);
  EXPECT_ANY_THROW(whitebox_optimize(seed_, targets_, *black_, cfg, monitor_));
  AttackConfig clone = cfg;
  clone.domain = Domain::kClone;
  EXPECT_THROW(whitebox_optimize(seed_, targets_, *white_, clone, monitor_), Error);
  const auto fbank = std::make_shared<encoder::ToyEncoder>(encoder::stock_encoder("fbank-x", 16, 8));
  const EncoderHandle fbank_white(fbank, EncoderHandle::Mode::kWhiteBox);
  EXPECT_THROW(whitebox_optimize(seed_, targets_, fbank_white, cfg, monitor_), Error);
}

TEST_F(AttackFixture, BlackBoxIsDeterministicAndClimbs) {
  AttackConfig cfg = config(4);
  const NesConfig nes{20, 0.001};
  const MasterVoice a = blackbox_optimize(seed_, targets_, *black_, cfg, nes, monitor_);
  const MasterVoice b = blackbox_optimize(seed_, targets_, *black_, cfg, nes, monitor_);
  EXPECT_EQ(a.waveform.samples, b.waveform.samples);
  EXPECT_EQ(a.ir_history, b.ir_history);
  EXPECT_GT(a.objective_history.back(), a.objective_history.front());
}

TEST_F(AttackFixture, CloneDomainStaysInCube) {
  const voicegen::CloneModel clone;
  AttackConfig cfg = config(2);
  cfg.domain = Domain::kClone;
  cfg.step_size = 0.2;
  const voicegen::TokenSequence prompt{"ab cd"};
  const Waveform seed = noise_wave(20, 0.3, audio::kStandardLength);
  const MasterVoice mv =
      blackbox_optimize(seed, targets_, *black_, cfg, {4, 0.01}, monitor_, {nullptr, &clone, prompt});
  ASSERT_EQ(mv.attack_vector.size(), clone.dim());
  EXPECT_GE(mv.attack_vector.minCoeff(), 0.0);
  EXPECT_LE(mv.attack_vector.maxCoeff(), 1.0);
  EXPECT_EQ(mv.waveform.size(), static_cast<std::size_t>(audio::kStandardLength));
}

}  // namespace
}  // namespace mvforge::attack
