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

#include "pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "mvforge/audio.hpp"
#include "mvforge/coverage.hpp"
#include "mvforge/errors.hpp"
#include "mvforge/rng.hpp"

namespace mvforge::harness {

using verification::ScoringRule;

std::string to_string(Role role) {
  switch (role) {
    case Role::kTrain:
      return "train";
    case Role::kOptimization:
      return "optimization";
    case Role::kTest:
      return "test";
    case Role::kSeedVoices:
      return "seed-voices";
  }
  return "unknown";
}

voicegen::PopulationSpec population_spec(const ExperimentConfig& cfg, Role role) {
  switch (role) {
    case Role::kTrain:
      return {2 * cfg.train_speakers_per_gender, cfg.train_utterances, 0.5, cfg.train_seed, "trn"};
    case Role::kOptimization:
      return {2 * cfg.speakers_per_gender, cfg.enrolled + cfg.probes, 0.5, cfg.optimization_seed,
              "opt"};
    case Role::kTest:
      return {2 * cfg.speakers_per_gender, cfg.enrolled + cfg.probes, 0.5, cfg.test_seed, "tst"};
    case Role::kSeedVoices:
      return {2 * cfg.seeds_per_gender, 1, 0.5, cfg.seed_voice_seed, "sv"};
  }
  throw_precondition("unknown population role");
}

std::vector<std::size_t> EmbeddedPopulation::speakers_of(std::optional<Gender> g) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!g || genders[i] == *g) out.push_back(i);
  }
  return out;
}

std::vector<std::uint8_t> EmbeddedPopulation::to_cbor() const {
  nlohmann::json speakers = nlohmann::json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    nlohmann::json rows = nlohmann::json::array();
    for (const Embedding& e : embeddings[i]) rows.push_back(std::vector<double>(e.begin(), e.end()));
    speakers.push_back(
        {{"id", ids[i]}, {"gender", voicegen::to_string(genders[i])}, {"embeddings", rows}});
  }
  return nlohmann::json::to_cbor(
      {{"encoder", encoder_id}, {"population", population_id}, {"speakers", speakers}});
}

EmbeddedPopulation EmbeddedPopulation::from_cbor(const std::vector<std::uint8_t>& bytes) {
  EmbeddedPopulation p;
  try {
    const nlohmann::json j = nlohmann::json::from_cbor(bytes);
    p.encoder_id = j.at("encoder").get<std::string>();
    p.population_id = j.at("population").get<std::string>();
    for (const auto& s : j.at("speakers")) {
      p.ids.push_back(s.at("id").get<std::string>());
      p.genders.push_back(voicegen::gender_from_string(s.at("gender").get<std::string>()));
      std::vector<Embedding> rows;
      for (const auto& r : s.at("embeddings")) {
        const auto v = r.get<std::vector<double>>();
        rows.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
      p.embeddings.push_back(std::move(rows));
    }
  } catch (const nlohmann::json::exception& e) {
    throw_precondition(std::string("malformed embedding file: ") + e.what());
  }
  return p;
}

EmbeddedPopulation embed_population(const voicegen::Population& pop,
                                    const encoder::ToyEncoder& enc, std::string population_id) {
  EmbeddedPopulation out;
  out.encoder_id = enc.arch_id;
  out.population_id = std::move(population_id);
  const encoder::FeatureFrontend fe = enc.frontend();
  for (std::size_t s = 0; s < pop.size(); ++s) {
    out.ids.push_back(pop.speakers[s].id);
    out.genders.push_back(pop.speakers[s].profile.gender);
    std::vector<Embedding> rows;
    for (std::size_t j = 0; j < pop.speakers[s].utterance_seeds.size(); ++j) {
      rows.push_back(encoder::encode(enc, fe.features(pop.utterance(s, j))));
    }
    out.embeddings.push_back(std::move(rows));
  }
  return out;
}

encoder::TrainResult train_stock_encoder(const ExperimentConfig& cfg, const std::string& arch_id,
                                         const voicegen::Population& train) {
  const auto stock = encoder::stock_arch_ids();
  const auto pos = std::find(stock.begin(), stock.end(), arch_id);
  if (pos == stock.end()) throw_config("unknown encoder architecture '" + arch_id + "'");
  const encoder::ToyEncoder init = encoder::stock_encoder(arch_id, cfg.embed_dim, cfg.hidden_dim);
  const encoder::FeatureFrontend fe = init.frontend();
  encoder::TrainingSet data;
  data.num_classes = static_cast<int>(train.size());
  for (std::size_t s = 0; s < train.size(); ++s) {
    for (std::size_t j = 0; j < train.speakers[s].utterance_seeds.size(); ++j) {
      data.features.push_back(fe.features(train.utterance(s, j)));
      data.labels.push_back(static_cast<int>(s));
    }
  }
  Rng rng = make_rng(cfg.training_seed, static_cast<std::uint64_t>(pos - stock.begin()));
  return encoder::train_encoder(init, data, {cfg.train_epochs, cfg.learning_rate, cfg.logit_scale},
                                rng);
}

verification::Gallery enrollment_gallery(const EmbeddedPopulation& pop, std::optional<Gender> g,
                                         int n) {
  verification::Gallery gallery(n, pop.population_id);
  for (std::size_t s : pop.speakers_of(g)) {
    require(pop.embeddings[s].size() >= static_cast<std::size_t>(n),
            "speaker " + pop.ids[s] + " has fewer utterances than enrollment needs");
    gallery.enroll(pop.ids[s], {pop.embeddings[s].begin(), pop.embeddings[s].begin() + n});
  }
  return gallery;
}

std::vector<Embedding> attack_targets(const EmbeddedPopulation& pop, Gender g, int n) {
  std::vector<Embedding> out;
  for (std::size_t s : pop.speakers_of(g)) {
    const auto& rows = pop.embeddings[s];
    out.insert(out.end(), rows.begin(), rows.begin() + std::min<std::ptrdiff_t>(n, std::ssize(rows)));
  }
  return out;
}

verification::ScoreSet raw_scores(const EmbeddedPopulation& pop) {
  verification::ScoreSet out;
  const std::size_t m = pop.size();
  for (std::size_t s = 0; s < m; ++s) {
    const auto& a = pop.embeddings[s];
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = i + 1; j < a.size(); ++j) out.genuine.push_back(a[i].dot(a[j]));
    }
    for (std::size_t t = s + 1; t < m; ++t) {
      const auto& b = pop.embeddings[t];
      for (std::size_t i = 0; i < std::min<std::size_t>(2, a.size()); ++i) {
        for (std::size_t j = 0; j < std::min<std::size_t>(2, b.size()); ++j) {
          out.impostor.push_back(a[i].dot(b[j]));
        }
      }
    }
  }
  return out;
}

verification::ScoreSet policy_scores(const EmbeddedPopulation& pop, int n, ScoringRule rule,
                                     bool normalize_avg) {
  const verification::Gallery gallery = enrollment_gallery(pop, std::nullopt, n);
  verification::ScoreSet out;
  for (std::size_t s = 0; s < pop.size(); ++s) {
    for (std::size_t j = static_cast<std::size_t>(n); j < pop.embeddings[s].size(); ++j) {
      const Embedding& probe = pop.embeddings[s][j];
      for (std::size_t u = 0; u < gallery.size(); ++u) {
        const double v = verification::score(probe, gallery, u, rule, normalize_avg);
        (u == s ? out.genuine : out.impostor).push_back(v);
      }
    }
  }
  return out;
}

OperatingPoint operating_point(std::span<const verification::RocPoint> curve, double far_target) {
  OperatingPoint p;
  const verification::EerPoint e = verification::eer(curve);
  p.eer = e.eer;
  p.eer_threshold = e.threshold;
  p.far_threshold = verification::threshold_at_far(curve, far_target);
  for (const auto& pt : curve) {
    if (pt.threshold == p.far_threshold) p.far_at_threshold = pt.far;
  }
  p.auc = verification::auc(curve);
  return p;
}

namespace {

nlohmann::json point_json(const OperatingPoint& p) {
  return {{"eer", p.eer},
          {"eer_threshold", p.eer_threshold},
          {"far_threshold", p.far_threshold},
          {"far_at_threshold", p.far_at_threshold},
          {"auc", p.auc}};
}

OperatingPoint point_from(const nlohmann::json& j) {
  OperatingPoint p;
  p.eer = j.at("eer").get<double>();
  p.eer_threshold = j.at("eer_threshold").get<double>();
  p.far_threshold = j.at("far_threshold").get<double>();
  p.far_at_threshold = j.at("far_at_threshold").get<double>();
  p.auc = j.at("auc").get<double>();
  return p;
}

}  // namespace

nlohmann::json Thresholds::to_json() const {
  return {{"raw", point_json(raw)}, {"any", point_json(any)}, {"avg", point_json(avg)}};
}

Thresholds Thresholds::from_json(const nlohmann::json& j) {
  try {
    return {point_from(j.at("raw")), point_from(j.at("any")), point_from(j.at("avg"))};
  } catch (const nlohmann::json::exception& e) {
    throw_precondition(std::string("malformed thresholds: ") + e.what());
  }
}

Calibration calibrate(const EmbeddedPopulation& opt, const ExperimentConfig& cfg) {
  Calibration c;
  c.raw_roc = verification::roc(raw_scores(opt));
  c.any_roc = verification::roc(policy_scores(opt, cfg.enrolled, ScoringRule::kAny, false));
  c.avg_roc =
      verification::roc(policy_scores(opt, cfg.enrolled, ScoringRule::kAvg, cfg.normalize_avg));
  c.thresholds.raw = operating_point(c.raw_roc, cfg.far_target);
  c.thresholds.any = operating_point(c.any_roc, cfg.far_target);
  c.thresholds.avg = operating_point(c.avg_roc, cfg.far_target);
  return c;
}

verification::Policy raw_policy(const ExperimentConfig& cfg, const Thresholds& t,
                                ScoringRule rule) {
  return {rule, cfg.enrolled, t.raw.far_threshold, cfg.normalize_avg};
}

verification::Policy calibrated_policy(const ExperimentConfig& cfg, const Thresholds& t,
                                       ScoringRule rule) {
  return {rule, cfg.enrolled, t.of(rule).far_threshold, cfg.normalize_avg};
}

std::vector<SeedVoice> seed_voices(const ExperimentConfig& cfg) {
  const voicegen::Population pop =
      voicegen::generate_population(population_spec(cfg, Role::kSeedVoices));
  std::vector<SeedVoice> out;
  for (Gender g : {Gender::kA, Gender::kB}) {
    for (std::size_t s : pop.speakers_of(g)) {
      out.push_back({pop.speakers[s].id, g, pop.utterance(s, 0)});
    }
  }
  return out;
}

std::string AttackJob::name() const {
  std::string n = attack::to_string(domain) + (black_box ? "-black" : "-white");
  if (augment) n += "-augment";
  return n;
}

AttackJob parse_attack_job(const std::string& name) {
  AttackJob job;
  const auto first = name.find('-');
  if (first == std::string::npos) throw_config("malformed attack run name '" + name + "'");
  job.domain = attack::domain_from_string(name.substr(0, first));
  std::string rest = name.substr(first + 1);
  if (rest.ends_with("-augment")) {
    job.augment = true;
    rest.resize(rest.size() - 8);
  }
  if (rest == "black") {
    job.black_box = true;
  } else if (rest != "white") {
    throw_config("malformed attack run name '" + name + "'");
  }
  return job;
}

const AttackSettings& attack_settings(const ExperimentConfig& cfg, const AttackJob& job) {
  if (job.domain == attack::Domain::kClone) return cfg.clone;
  return job.black_box ? cfg.black : cfg.white;
}

attack::AttackConfig attack_config(const ExperimentConfig& cfg, const AttackJob& job,
                                   std::size_t seed_index) {
  const AttackSettings& s = attack_settings(cfg, job);
  attack::AttackConfig a;
  a.domain = job.domain;
  a.step_size = s.step_size;
  a.epochs = s.epochs;
  a.batch_size = s.batch_size;
  a.norm_mode = s.norm_mode;
  a.linf_budget = s.linf_budget;
  a.playback_augment = job.augment;
  a.seed = mix_seed(cfg.attack_seed, seed_index);
  a.griffin_lim_iters = cfg.griffin_lim_iters;
  return a;
}

attack::PlaybackKernels playback_kernels(const ExperimentConfig& cfg) {
  attack::PlaybackKernels k = attack::PlaybackKernels::synthetic(cfg.playback_seed);
  k.noise_sigma = cfg.playback_noise_sigma;
  return k;
}

attack::AttackResources attack_resources(const ExperimentConfig& cfg,
                                         const attack::PlaybackKernels& kernels,
                                         const voicegen::CloneModel& clone) {
  attack::AttackResources r;
  r.playback = &kernels;
  r.clone = &clone;
  r.prompt = voicegen::TokenSequence{cfg.clone_prompt};
  return r;
}

attack::MasterVoice run_attack(const ExperimentConfig& cfg, const AttackJob& job,
                               std::size_t seed_index, const SeedVoice& seed,
                               const encoder::EncoderHandle& target,
                               std::span<const Embedding> targets,
                               const attack::Monitor& monitor,
                               const attack::AttackResources& resources) {
  const attack::AttackConfig a = attack_config(cfg, job, seed_index);
  attack::MasterVoice mv =
      (job.black_box || job.domain == attack::Domain::kClone)
          ? attack::blackbox_optimize(seed.waveform, targets, target, a,
                                      attack_settings(cfg, job).nes, monitor, resources)
          : attack::whitebox_optimize(seed.waveform, targets, target, a, monitor, resources);
  mv.seed_id = seed.id;
  return mv;
}

double playback_impersonation_rate(const encoder::Waveform& w, const encoder::EncoderHandle& enc,
                                   const attack::PlaybackKernels& kernels,
                                   const verification::Gallery& gallery,
                                   const verification::Policy& policy, int trials,
                                   std::uint64_t seed) {
  require(trials >= 1, "playback evaluation needs at least one trial");
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(t));
    const Embedding f = enc.embed(attack::playback(w, kernels, rng));
    total += verification::impersonation_rate(std::span(&f, 1), gallery, policy);
  }
  return total / trials;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kRandom:
      return "rand";
    case Strategy::kIndependent:
      return "ind";
    case Strategy::kComplementary:
      return "comp";
  }
  return "unknown";
}

namespace {

void pad_to(std::vector<double>& v, std::size_t n) {
  const double last = v.empty() ? 0.0 : v.back();
  v.resize(n, last);
}

void moments(const std::vector<std::vector<double>>& runs, std::size_t n, std::vector<double>& mean,
             std::vector<double>& sd) {
  mean.assign(n, 0.0);
  sd.assign(n, 0.0);
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < n; ++i) mean[i] += r[i];
  }
  for (double& m : mean) m /= static_cast<double>(runs.size());
  if (runs.size() < 2) return;
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < n; ++i) sd[i] += (r[i] - mean[i]) * (r[i] - mean[i]);
  }
  for (double& v : sd) v = std::sqrt(v / static_cast<double>(runs.size() - 1));
}

}  // namespace

std::vector<std::pair<Strategy, CoverageCurves>> bootstrap_coverage(
    std::span<const Embedding> candidates, const verification::Gallery& optimization,
    const verification::Gallery& test, const verification::Policy& policy, int attempts,
    int repetitions, double fraction, std::uint64_t seed) {
  require(!candidates.empty(), "coverage needs at least one candidate");
  require(attempts >= 1 && repetitions >= 1, "coverage needs attempts and repetitions");
  require(fraction > 0.0 && fraction <= 1.0, "subset fraction must lie in (0, 1]");
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < candidates.size(); ++i) ids.push_back(std::to_string(i));
  const coverage::ImpersonationMatrix full =
      coverage::impersonation_matrix(candidates, ids, optimization, policy);
  const coverage::ImpersonationMatrix on_test =
      coverage::impersonation_matrix(candidates, ids, test, policy);
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(full.users()))));
  const std::size_t n = static_cast<std::size_t>(attempts);

  const std::array<Strategy, 3> strategies{Strategy::kRandom, Strategy::kIndependent,
                                           Strategy::kComplementary};
  std::array<std::vector<std::vector<double>>, 3> opt_runs, test_runs;
  std::vector<std::size_t> users(full.users());
  for (int rep = 0; rep < repetitions; ++rep) {
    Rng subset_rng = make_rng(seed, 2 * static_cast<std::uint64_t>(rep));
    Rng pick_rng = make_rng(seed, 2 * static_cast<std::uint64_t>(rep) + 1);
    std::iota(users.begin(), users.end(), 0);
    std::shuffle(users.begin(), users.end(), subset_rng);
    std::vector<std::size_t> subset(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(subset.begin(), subset.end());
    const coverage::ImpersonationMatrix b = full.select_users(subset);
    for (std::size_t k = 0; k < strategies.size(); ++k) {
      coverage::SelectionResult r;
      switch (strategies[k]) {
        case Strategy::kRandom:
          r = coverage::select_random(b, attempts, pick_rng);
          break;
        case Strategy::kIndependent:
          r = coverage::select_independent(b, attempts);
          break;
        case Strategy::kComplementary:
          r = coverage::select_complementary(b, attempts);
          break;
      }
      std::vector<double> o = r.per_attempt_coverage;
      std::vector<double> t = coverage::cumulative_coverage(on_test, r.chosen);
      pad_to(o, n);
      pad_to(t, n);
      opt_runs[k].push_back(std::move(o));
      test_runs[k].push_back(std::move(t));
    }
  }
  std::vector<std::pair<Strategy, CoverageCurves>> out;
  for (std::size_t k = 0; k < strategies.size(); ++k) {
    CoverageCurves c;
    moments(opt_runs[k], n, c.optimization_mean, c.optimization_std);
    moments(test_runs[k], n, c.test_mean, c.test_std);
    out.emplace_back(strategies[k], std::move(c));
  }
  return out;
}

encoder::Waveform as_stored(const encoder::Waveform& w) {
  return audio::decode_wav(audio::encode_wav(w, audio::WavEncoding::kFloat32));
}

}  // namespace mvforge::harness
