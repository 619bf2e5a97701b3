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

// End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Criterion numbers may be passed
// as arguments to run a subset.

#include <fmt/format.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "artifacts.hpp"
#include "config.hpp"
#include "mvforge/attack.hpp"
#include "mvforge/audio.hpp"
#include "mvforge/coverage.hpp"
#include "mvforge/encoder.hpp"
#include "mvforge/playback.hpp"
#include "mvforge/verification.hpp"
#include "mvforge/voicegen.hpp"
#include "pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mvforge;
using harness::EmbeddedPopulation;
using harness::ExperimentConfig;
using voicegen::Gender;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double ir_of(const audio::Waveform& w, const encoder::EncoderHandle& enc,
             const verification::Gallery& gallery, const verification::Policy& policy) {
  const encoder::Embedding f = enc.embed(w);
  return verification::impersonation_rate(std::span(&f, 1), gallery, policy);
}

// ---------------------------------------------------------------------------
// Desk-scale synthetic stack shared by the end-to-end criteria.

struct EncoderState {
  std::shared_ptr<const encoder::ToyEncoder> model;
  std::unique_ptr<encoder::EncoderHandle> white;
  std::unique_ptr<encoder::EncoderHandle> black;
  EmbeddedPopulation opt;
  EmbeddedPopulation test;
  harness::Thresholds thresholds;
  verification::Policy policy;  // avg-10 at the raw far-1 threshold

  const verification::Gallery& gallery(bool test_population, Gender g) const {
    return (test_population ? test_galleries : opt_galleries)[g == Gender::kA ? 0 : 1];
  }
  std::vector<verification::Gallery> opt_galleries;
  std::vector<verification::Gallery> test_galleries;
};

struct Attacked {
  std::vector<attack::MasterVoice> voices;  // parallel to the seed list
  double seconds = 0.0;
};

class Stack {
 public:
  static Stack& get() {
    static Stack stack;
    return stack;
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  const std::vector<harness::SeedVoice>& seeds() const { return seeds_; }
  const EncoderState& spec_a() const { return a_; }
  const EncoderState& spec_b() const { return b_; }
  double setup_seconds() const { return setup_seconds_; }

  // Runs (or returns the cached) attack for the given seeds.
  const attack::MasterVoice& attack(const harness::AttackJob& job, std::size_t seed_index) {
    auto& runs = cache_[job.name()];
    if (runs.size() <= seed_index) runs.resize(seeds_.size());
    if (!runs[seed_index]) {
      const harness::SeedVoice& seed = seeds_[seed_index];
      const bool black = job.black_box || job.domain == attack::Domain::kClone;
      const auto targets = harness::attack_targets(a_.opt, seed.gender, cfg_.enrolled);
      const verification::Policy monitor_policy =
          harness::raw_policy(cfg_, a_.thresholds, cfg_.monitor_rule);
      harness::Stopwatch sw;
      runs[seed_index] = harness::run_attack(
          cfg_, job, seed_index, seed, black ? *a_.black : *a_.white, targets,
          {&a_.gallery(false, seed.gender), monitor_policy}, resources_);
      attack_seconds_[job.name()] += sw.seconds();
    }
    return *runs[seed_index];
  }
  double attack_seconds(const harness::AttackJob& job) { return attack_seconds_[job.name()]; }

  const attack::PlaybackKernels& kernels() const { return kernels_; }
  const voicegen::CloneModel& clone() const { return clone_; }
  const attack::AttackResources& resources() const { return resources_; }

 private:
  Stack()
      : kernels_(harness::playback_kernels(cfg_)),
        resources_(harness::attack_resources(cfg_, kernels_, clone_)) {
    harness::Stopwatch sw;
    const auto train = voicegen::generate_population(
        harness::population_spec(cfg_, harness::Role::kTrain));
    const auto opt = voicegen::generate_population(
        harness::population_spec(cfg_, harness::Role::kOptimization));
    const auto test =
        voicegen::generate_population(harness::population_spec(cfg_, harness::Role::kTest));
    build(a_, "spec-a", train, opt, test);
    build(b_, "spec-b", train, opt, test);
    seeds_ = harness::seed_voices(cfg_);
    setup_seconds_ = sw.seconds();
  }

  void build(EncoderState& s, const std::string& arch, const voicegen::Population& train,
             const voicegen::Population& opt, const voicegen::Population& test) {
    s.model = std::make_shared<const encoder::ToyEncoder>(
        harness::train_stock_encoder(cfg_, arch, train).encoder);
    s.white = std::make_unique<encoder::EncoderHandle>(s.model,
                                                       encoder::EncoderHandle::Mode::kWhiteBox);
    s.black = std::make_unique<encoder::EncoderHandle>(s.model,
                                                       encoder::EncoderHandle::Mode::kBlackBox);
    s.opt = harness::embed_population(opt, *s.model, "U_o");
    s.test = harness::embed_population(test, *s.model, "U_t");
    s.thresholds = harness::calibrate(s.opt, cfg_).thresholds;
    s.policy = harness::raw_policy(cfg_, s.thresholds, verification::ScoringRule::kAvg);
    for (Gender g : {Gender::kA, Gender::kB}) {
      s.opt_galleries.push_back(harness::enrollment_gallery(s.opt, g, cfg_.enrolled));
      s.test_galleries.push_back(harness::enrollment_gallery(s.test, g, cfg_.enrolled));
    }
  }

  ExperimentConfig cfg_{};
  voicegen::CloneModel clone_{};
  attack::PlaybackKernels kernels_;
  attack::AttackResources resources_;
  EncoderState a_;
  EncoderState b_;
  std::vector<harness::SeedVoice> seeds_;
  double setup_seconds_ = 0.0;
  std::map<std::string, std::vector<std::optional<attack::MasterVoice>>> cache_;
  std::map<std::string, double> attack_seconds_;
};

const harness::AttackJob kWhite{attack::Domain::kWaveform, false, false};
const harness::AttackJob kBlack{attack::Domain::kWaveform, true, false};
const harness::AttackJob kWhiteAugment{attack::Domain::kWaveform, false, true};
const harness::AttackJob kClone{attack::Domain::kClone, true, false};

// Test-population IR of seed and master voices under spec-a, per gender.
struct UpliftTable {
  std::vector<double> sv[2];
  std::vector<double> mv[2];
  double uplift(int g) const { return mean(mv[g]) - mean(sv[g]); }
  double pooled_uplift() const {
    std::vector<double> all_sv(sv[0]), all_mv(mv[0]);
    all_sv.insert(all_sv.end(), sv[1].begin(), sv[1].end());
    all_mv.insert(all_mv.end(), mv[1].begin(), mv[1].end());
    return mean(all_mv) - mean(all_sv);
  }
};

UpliftTable uplift_table(const harness::AttackJob& job) {
  Stack& st = Stack::get();
  const EncoderState& a = st.spec_a();
  UpliftTable t;
  for (std::size_t i = 0; i < st.seeds().size(); ++i) {
    const auto& seed = st.seeds()[i];
    const int g = seed.gender == Gender::kA ? 0 : 1;
    const auto& gallery = a.gallery(true, seed.gender);
    t.sv[g].push_back(ir_of(seed.waveform, *a.white, gallery, a.policy));
    t.mv[g].push_back(ir_of(st.attack(job, i).waveform, *a.white, gallery, a.policy));
  }
  return t;
}

Outcome criterion1() {
  Stack& st = Stack::get();
  const double eer = st.spec_a().thresholds.raw.eer;
  const UpliftTable t = uplift_table(kWhite);
  const double secs = st.attack_seconds(kWhite);
  bool pass = eer <= 0.15 && secs <= 600.0;
  std::string detail = fmt::format("spec-a EER {:.3f}", eer);
  for (int g = 0; g < 2; ++g) {
    const double sv = mean(t.sv[g]), mv = mean(t.mv[g]);
    pass = pass && mv >= sv + 0.10 && mv >= 3.0 * sv;
    detail += fmt::format("; {} SV {:.3f} MV {:.3f}", g == 0 ? "A" : "B", sv, mv);
  }
  detail += fmt::format("; attack {:.0f}s (setup {:.0f}s)", secs, st.setup_seconds());
  return {pass, detail};
}

Outcome criterion2() {
  Stack& st = Stack::get();
  const EncoderState& a = st.spec_a();
  std::vector<double> gaps;
  for (std::size_t i = 0; i < st.seeds().size(); ++i) {
    const auto& seed = st.seeds()[i];
    const auto& mv = st.attack(kWhite, i).waveform;
    gaps.push_back(std::abs(ir_of(mv, *a.white, a.gallery(false, seed.gender), a.policy) -
                            ir_of(mv, *a.white, a.gallery(true, seed.gender), a.policy)));
  }
  const double gap = mean(gaps);
  return {gap <= 0.15, fmt::format("mean |IR(U_o) - IR(U_t)| {:.3f} over {} seeds", gap, gaps.size())};
}

Outcome criterion3() {
  Stack& st = Stack::get();
  const double white = uplift_table(kWhite).pooled_uplift();
  const double black = uplift_table(kBlack).pooled_uplift();
  const double secs = st.attack_seconds(kBlack);
  // A ratio against a non-positive white-box uplift is meaningless.
  const bool pass = white > 0.0 && black >= 0.4 * white && secs <= 1800.0;
  return {pass, fmt::format("white uplift {:+.3f}, black uplift {:+.3f}, black attack {:.0f}s",
                            white, black, secs)};
}

Outcome criterion4() {
  Rng rng = make_rng(404);
  bool zero = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng r = make_rng(s);
    const Eigen::VectorXd x = Eigen::VectorXd::Random(5 + static_cast<int>(s));
    const Eigen::VectorXd g =
        attack::nes_gradient([](const Eigen::VectorXd&) { return 3.25; }, x, {50, 0.01}, r);
    zero = zero && (g.array() == 0.0).all();
  }
  std::normal_distribution<double> gauss;
  std::vector<double> cosines;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(10, 10, [&] { return gauss(rng); });
    const Eigen::MatrixXd a = m.transpose() * m / 10.0 + Eigen::MatrixXd::Identity(10, 10);
    const Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(10, [&] { return gauss(rng); });
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(10, [&] { return gauss(rng); });
    auto f = [&](const Eigen::VectorXd& y) { return 0.5 * y.dot(a * y) + b.dot(y); };
    const Eigen::VectorXd analytic = a * x + b;
    const Eigen::VectorXd est = attack::nes_gradient(f, x, {200, 0.001}, rng);
    cosines.push_back(est.dot(analytic) / (est.norm() * analytic.norm()));
  }
  const double c = mean(cosines);
  return {zero && c >= 0.95,
          fmt::format("constant objective zero gradient: {}; quadratic mean cosine {:.4f}",
                      zero ? "yes" : "no", c)};
}

// Relative error of an analytic gradient against central differences over
// every coordinate.
double gradient_error(const std::function<double(const Eigen::VectorXd&)>& f,
                      const Eigen::VectorXd& x, const Eigen::VectorXd& analytic, double h) {
  Eigen::VectorXd fd(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double up = f(y);
    y[i] = x[i] - h;
    const double down = f(y);
    y[i] = x[i];
    fd[i] = (up - down) / (2.0 * h);
  }
  return (analytic - fd).norm() / fd.norm();
}

Outcome criterion5() {
  Rng rng = make_rng(505);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  std::normal_distribution<double> gauss;
  const audio::StftConfig stft;
  double worst_encoder = 0.0, worst_chain = 0.0;
  constexpr int kInstances = 20;
  for (int k = 0; k < kInstances; ++k) {
    const auto enc = encoder::make_encoder("probe", encoder::InputKind::kSpectrogram, stft.bins(),
                                           4 + k % 5, 3 + k % 4, 900 + static_cast<std::uint64_t>(k));
    Eigen::VectorXd target = Eigen::VectorXd::NullaryExpr(enc.embed_dim(), [&] { return gauss(rng); });
    target.normalize();

    const int frames = 2 + k % 3;
    const Eigen::Index rows = stft.bins();
    const Eigen::VectorXd feats = Eigen::VectorXd::NullaryExpr(rows * frames, [&] { return gauss(rng); });
    auto f_enc = [&](const Eigen::VectorXd& v) {
      return encoder::encode(enc, Eigen::Map<const audio::Matrix>(v.data(), rows, frames)).dot(target);
    };
    const audio::Matrix g_enc = encoder::encode_backward(
        enc, Eigen::Map<const audio::Matrix>(feats.data(), rows, frames), target);
    worst_encoder = std::max(
        worst_encoder,
        gradient_error(f_enc, feats, Eigen::Map<const Eigen::VectorXd>(g_enc.data(), g_enc.size()), 1e-6));

    // Full chain: waveform -> STFT magnitude -> normalization -> encoder -> mean cosine.
    std::vector<Eigen::VectorXd> batch;
    for (int t = 0; t < 3; ++t) {
      batch.push_back(Eigen::VectorXd::NullaryExpr(enc.embed_dim(), [&] { return gauss(rng); }));
      batch.back().normalize();
    }
    const std::size_t len = stft.span(frames) + static_cast<std::size_t>(k % 7);
    Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(len), [&] { return unif(rng); });
    auto objective = [&](const Eigen::VectorXd& v) {
      const audio::Waveform wave(std::vector<double>(v.data(), v.data() + v.size()));
      const encoder::Embedding e = encoder::encode(enc, enc.frontend().features(wave));
      double s = 0.0;
      for (const auto& b : batch) s += e.dot(b);
      return s / static_cast<double>(batch.size());
    };
    Eigen::VectorXd batch_mean = Eigen::VectorXd::Zero(enc.embed_dim());
    for (const auto& b : batch) batch_mean += b / static_cast<double>(batch.size());
    const audio::Waveform wave(std::vector<double>(w.data(), w.data() + w.size()));
    const audio::Matrix feat = enc.frontend().features(wave);
    const std::vector<double> g =
        enc.frontend().backward(wave, encoder::encode_backward(enc, feat, batch_mean));
    worst_chain = std::max(
        worst_chain,
        gradient_error(objective, w, Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())), 1e-6));
  }
  return {worst_encoder <= 1e-4 && worst_chain <= 1e-4,
          fmt::format("{} instances; worst relative error encoder {:.2e}, waveform chain {:.2e}",
                      kInstances, worst_encoder, worst_chain)};
}

Outcome criterion6() {
  Rng rng = make_rng(606);
  std::normal_distribution<double> genuine(1.0, 0.5), impostor(0.0, 0.5);
  verification::ScoreSet scores;
  constexpr int kN = 10000;
  for (int i = 0; i < kN; ++i) {
    scores.genuine.push_back(genuine(rng));
    scores.impostor.push_back(impostor(rng));
  }
  auto rates = [&](double tau) {
    const double far = static_cast<double>(std::count_if(scores.impostor.begin(), scores.impostor.end(),
                                                         [&](double s) { return s > tau; })) / kN;
    const double frr = static_cast<double>(std::count_if(scores.genuine.begin(), scores.genuine.end(),
                                                         [&](double s) { return s <= tau; })) / kN;
    return std::pair{far, frr};
  };
  const auto curve = verification::roc(scores);
  const auto [far_e, frr_e] = rates(verification::eer(curve).threshold);
  const double gap = std::abs(far_e - frr_e);
  const double far1 = rates(verification::threshold_at_far(curve, 0.01)).first;

  verification::ScoreSet separated;
  for (int i = 0; i < 1000; ++i) {
    separated.genuine.push_back(1.0 + i * 1e-3);
    separated.impostor.push_back(-1.0 + i * 1e-3);
  }
  const double auc = verification::auc(verification::roc(separated));
  const bool pass = gap <= 1.0 / kN + 1e-12 && far1 >= 0.0 && far1 <= 0.011 && auc == 1.0;
  return {pass, fmt::format("EER |FAR-FRR| {:.5f} (step {:.5f}); far-1 FAR {:.4f}; separated AUC {}",
                            gap, 1.0 / kN, far1, auc)};
}

Outcome criterion7() {
  Rng rng = make_rng(707);
  std::bernoulli_distribution bit(0.3);
  const double bound = 1.0 - std::exp(-1.0);
  int bound_ok = 0, marginal_ok = 0;
  constexpr int kInstances = 200;
  for (int k = 0; k < kInstances; ++k) {
    std::vector<std::vector<int>> rows(12, std::vector<int>(15));
    for (auto& r : rows) {
      for (auto& v : r) v = bit(rng) ? 1 : 0;
    }
    const auto b = coverage::ImpersonationMatrix::from_rows(rows);
    const auto greedy = coverage::select_complementary(b, 3);
    const auto best = coverage::brute_force_optimal(b, 3);
    if (greedy.coverage() >= bound * best.coverage() - 1e-12) ++bound_ok;

    // Marginal optimality, recomputed from the raw rows.
    std::vector<bool> covered(15, false);
    std::set<std::size_t> used;
    bool ok = true;
    for (std::size_t pick : greedy.chosen) {
      auto gain = [&](std::size_t c) {
        int n = 0;
        for (std::size_t u = 0; u < 15; ++u) n += rows[c][u] && !covered[u];
        return n;
      };
      int best_gain = 0;
      for (std::size_t c = 0; c < 12; ++c) {
        if (!used.count(c)) best_gain = std::max(best_gain, gain(c));
      }
      ok = ok && !used.count(pick) && gain(pick) == best_gain;
      used.insert(pick);
      for (std::size_t u = 0; u < 15; ++u) covered[u] = covered[u] || rows[pick][u];
    }
    if (ok) ++marginal_ok;
  }
  const auto worked = coverage::ImpersonationMatrix::from_rows({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}});
  const double comp = coverage::select_complementary(worked, 2).coverage();
  const double ind = coverage::select_independent(worked, 2).coverage();
  const bool pass = bound_ok == kInstances && marginal_ok == kInstances && comp == 1.0 &&
                    ind == 2.0 / 3.0;
  return {pass, fmt::format("bound {}/{}; marginal optimality {}/{}; worked example comp {:.3f} "
                            "ind {:.3f}",
                            bound_ok, kInstances, marginal_ok, kInstances, comp, ind)};
}

Outcome criterion8() {
  Rng rng = make_rng(808);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  bool identical = true;
  const auto identity = attack::PlaybackKernels::identity();
  for (int k = 0; k < 10; ++k) {
    std::vector<double> s(5000 + 37 * k);
    for (double& v : s) v = unif(rng);
    const audio::Waveform w(s);
    identical = identical && attack::playback(w, identity, rng).samples == w.samples;
  }

  Stack& st = Stack::get();
  const EncoderState& a = st.spec_a();
  const std::size_t per_gender = st.seeds().size() / 2;
  // Alternating genders: A0, B0, A1, B1, A2.
  const std::vector<std::size_t> pairs{0, per_gender, 1, per_gender + 1, 2};
  std::vector<double> plain, augmented;
  for (std::size_t i : pairs) {
    const auto& seed = st.seeds()[i];
    const auto& gallery = a.gallery(true, seed.gender);
    const std::uint64_t eval_seed = mix_seed(st.cfg().playback_seed, 8000 + i);
    plain.push_back(harness::playback_impersonation_rate(
        st.attack(kWhite, i).waveform, *a.white, st.kernels(), gallery, a.policy,
        st.cfg().playback_trials, eval_seed));
    augmented.push_back(harness::playback_impersonation_rate(
        st.attack(kWhiteAugment, i).waveform, *a.white, st.kernels(), gallery, a.policy,
        st.cfg().playback_trials, eval_seed));
  }
  const bool pass = identical && mean(augmented) >= mean(plain);
  return {pass, fmt::format("identity playback bit-identical: {}; IR under playback, augmented "
                            "{:.3f} vs plain {:.3f} over {} paired seeds",
                            identical ? "yes" : "no", mean(augmented), mean(plain), pairs.size())};
}

Outcome criterion9() {
  const audio::StftConfig stft;
  std::vector<double> s(16000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = 0.5 * std::sin(2.0 * M_PI * 440.0 * static_cast<double>(i) / audio::kSampleRate);
  }
  const audio::Spectrogram target = audio::spectrogram(audio::Waveform(s), stft);
  Rng rng = make_rng(909);
  std::vector<double> trace;
  const audio::Waveform y = audio::griffin_lim(target, 50, rng, &trace);
  const audio::Matrix got = audio::spectrogram(y, stft).mag;
  const double err = (got - target.mag).norm() / target.mag.norm();
  bool monotone = trace.size() == 50;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    monotone = monotone && trace[i] <= trace[i - 1] * (1.0 + 1e-12);
  }
  return {err <= 0.10 && monotone,
          fmt::format("relative magnitude error {:.4f}; consistency non-increasing over {} "
                      "iterations: {}",
                      err, trace.size(), monotone ? "yes" : "no")};
}

Outcome criterion10() {
  Stack& st = Stack::get();
  const EncoderState& b = st.spec_b();
  const std::size_t per_gender = st.seeds().size() / 2;
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < 5; ++i) {
    chosen.push_back(i);
    chosen.push_back(per_gender + i);
  }
  int raised = 0;
  std::vector<double> clone_uplift, wave_uplift;
  for (std::size_t i : chosen) {
    const auto& seed = st.seeds()[i];
    const attack::MasterVoice& mv = st.attack(kClone, i);
    if (!mv.ir_history.empty() && mv.ir_history.back() > mv.seed_ir) ++raised;

    // Transfer to spec-b, each attack measured from its own starting sample.
    const auto& gallery = b.gallery(false, seed.gender);
    Rng rng = make_rng(st.cfg().attack_seed, 1000 + i);
    const audio::Waveform clone_start = attack::apply_clone(
        st.clone(), st.resources().prompt, st.clone().get_speaker_embedding(seed.waveform), rng);
    clone_uplift.push_back(ir_of(mv.waveform, *b.white, gallery, b.policy) -
                           ir_of(clone_start, *b.white, gallery, b.policy));
    wave_uplift.push_back(ir_of(st.attack(kWhite, i).waveform, *b.white, gallery, b.policy) -
                          ir_of(seed.waveform, *b.white, gallery, b.policy));
  }
  const bool pass = raised >= 8 && mean(clone_uplift) > mean(wave_uplift);
  return {pass, fmt::format("clone attack raised IR for {}/{} seeds ({:.0f}s); spec-b uplift "
                            "clone {:+.3f} vs waveform {:+.3f}",
                            raised, chosen.size(), st.attack_seconds(kClone), mean(clone_uplift),
                            mean(wave_uplift))};
}

// ---------------------------------------------------------------------------

constexpr const char* kSmallConfig = R"([output]
dir = out

[population]
speakers_per_gender = 6
train_speakers_per_gender = 5
train_utterances = 5
enrolled = 4
probes = 2
seeds_per_gender = 2

[encoder]
epochs = 2

[attack.white]
epochs = 2
batch_size = 8

[attack.black]
epochs = 1
batch_size = 12
nes_samples = 3

[attack.clone]
epochs = 1
batch_size = 12
nes_samples = 3

[coverage]
attempts = 2
bootstrap = 4
)";

bool run_cli(const fs::path& config, const std::string& args) {
  const std::string cmd =
      fmt::format("\"{}\" {} --config \"{}\" > /dev/null", MVFORGE_CLI_PATH, args, config.string());
  return std::system(cmd.c_str()) == 0;
}

std::map<std::string, std::string> manifests(const fs::path& out) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.path().filename() == "manifest.json") {
      m[fs::relative(e.path(), out).generic_string()] = harness::read_file(e.path());
    }
  }
  return m;
}

Outcome criterion11() {
  const fs::path root =
      fs::temp_directory_path() / fmt::format("mvforge-acceptance-{}", ::getpid());
  fs::remove_all(root);
  const std::vector<std::string> stages{
      "gen-data",      "train-encoder", "calibrate", "attack", "attack --threat black",
      "attack --domain spectrogram", "attack --domain clone", "attack --augment",
      "evaluate --transfer", "coverage", "report"};
  bool ok = true;
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"first", "second"}) {
    const fs::path cfg = root / name / "experiment.ini";
    harness::write_file(cfg, kSmallConfig);
    for (const auto& s : stages) ok = ok && run_cli(cfg, s);
    runs.push_back(manifests(cfg.parent_path() / "out"));
  }
  // Forced re-run in place.
  const fs::path first = root / "first" / "experiment.ini";
  for (const auto& s : stages) ok = ok && run_cli(first, s + " --force");
  runs.push_back(manifests(first.parent_path() / "out"));

  int differing = 0;
  for (const auto& [path, text] : runs[0]) {
    for (std::size_t r = 1; r < runs.size(); ++r) {
      const auto it = runs[r].find(path);
      if (it == runs[r].end() || it->second != text) ++differing;
    }
  }
  const bool pass = ok && differing == 0 && runs[0].size() == stages.size() &&
                    runs[1].size() == runs[0].size() && runs[2].size() == runs[0].size();
  fs::remove_all(root);
  return {pass, fmt::format("{} stage manifests, 3 runs, {} differing; all commands succeeded: {}",
                            runs[0].size(), differing, ok ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3},  {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7},  {8, criterion8},
      {9, criterion9}, {10, criterion10}, {11, criterion11}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    harness::Stopwatch sw;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d: %s  %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                sw.seconds());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
