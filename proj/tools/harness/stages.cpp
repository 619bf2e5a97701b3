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

#include "stages.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "artifacts.hpp"
#include "mvforge/audio.hpp"
#include "mvforge/coverage.hpp"
#include "mvforge/errors.hpp"
#include "svg.hpp"

namespace mvforge::harness {
namespace fs = std::filesystem;
using verification::Gallery;
using verification::Policy;
using verification::ScoringRule;

namespace {

constexpr std::array<Role, 4> kAllRoles{Role::kTrain, Role::kOptimization, Role::kTest,
                                        Role::kSeedVoices};
constexpr std::array<ScoringRule, 2> kRules{ScoringRule::kAny, ScoringRule::kAvg};

std::string fmt_double(double v) { return format_double(v); }

std::string policy_label(ScoringRule rule, int n) {
  return verification::to_string(rule) + "-" + std::to_string(n);
}

void prepare_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) {
      throw_precondition("output directory " + dir.string() +
                         " is not empty; pass --force to overwrite");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

nlohmann::json config_sections(const ExperimentConfig& cfg,
                               std::initializer_list<const char*> sections) {
  const nlohmann::json all = cfg.to_json();
  nlohmann::json out = nlohmann::json::object();
  for (const char* s : sections) out[s] = all.at(s);
  return out;
}

// The upstream stage must have run with the same settings for every section
// this stage depends on.
fs::path check_upstream(const ExperimentConfig& cfg, const std::string& stage,
                        std::initializer_list<const char*> sections) {
  static const std::map<std::string, std::string> kCommand{
      {"data", "gen-data"}, {"encoders", "train-encoder"}, {"calibration", "calibrate"}};
  const fs::path manifest = cfg.output_dir / stage / "manifest.json";
  if (!fs::exists(manifest)) {
    throw_precondition("missing " + manifest.string() + "; run 'mvforge " + kCommand.at(stage) +
                       "' first");
  }
  const nlohmann::json recorded = read_json(manifest).at("config");
  const nlohmann::json current = cfg.to_json();
  for (const char* s : sections) {
    if (!recorded.contains(s) || recorded.at(s) != current.at(s)) {
      throw_precondition("stage '" + stage + "' ran with a different [" + s +
                         "] section; re-run it");
    }
  }
  return manifest;
}

fs::path encoder_path(const ExperimentConfig& cfg, const std::string& arch) {
  return cfg.output_dir / "encoders" / (arch + ".json");
}

encoder::ToyEncoder load_encoder(const ExperimentConfig& cfg, const std::string& arch) {
  return encoder::from_json(read_file(encoder_path(cfg, arch)));
}

fs::path embedding_path(const ExperimentConfig& cfg, const std::string& arch, Role role) {
  return cfg.output_dir / "calibration" / "embeddings" / (arch + "_" + to_string(role) + ".cbor");
}

EmbeddedPopulation load_embeddings(const ExperimentConfig& cfg, const std::string& arch,
                                   Role role) {
  const std::string bytes = read_file(embedding_path(cfg, arch, role));
  return EmbeddedPopulation::from_cbor(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
}

std::map<std::string, Thresholds> load_thresholds(const ExperimentConfig& cfg) {
  const nlohmann::json j = read_json(cfg.output_dir / "calibration" / "thresholds.json");
  std::map<std::string, Thresholds> out;
  for (const auto& [arch, t] : j.items()) out.emplace(arch, Thresholds::from_json(t));
  return out;
}

std::shared_ptr<const encoder::ToyEncoder> shared_encoder(const ExperimentConfig& cfg,
                                                          const std::string& arch) {
  return std::make_shared<const encoder::ToyEncoder>(load_encoder(cfg, arch));
}

CsvWriter roc_csv(std::span<const verification::RocPoint> curve) {
  CsvWriter csv({"threshold", "far", "frr"});
  for (const auto& p : curve) csv.row({fmt_double(p.threshold), fmt_double(p.far), fmt_double(p.frr)});
  return csv;
}

std::string gender_name(Gender g) { return voicegen::to_string(g); }

std::vector<fs::path> attack_runs(const ExperimentConfig& cfg) {
  std::vector<fs::path> runs;
  const fs::path dir = cfg.output_dir / "attacks";
  if (!fs::exists(dir)) return runs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) runs.push_back(e.path());
  }
  std::sort(runs.begin(), runs.end());
  return runs;
}

struct RunSeed {
  std::string id;
  Gender gender;
  encoder::Waveform seed;
  encoder::Waveform master;
};

std::vector<RunSeed> load_run(const fs::path& run_dir) {
  const CsvTable t = read_csv(run_dir / "results.csv");
  const std::size_t id_col = t.column("seed_id");
  const std::size_t g_col = t.column("gender");
  std::vector<RunSeed> out;
  for (const auto& r : t.rows) {
    out.push_back({r[id_col], voicegen::gender_from_string(r[g_col]),
                   audio::load_wav(run_dir / ("sv_" + r[id_col] + ".wav")),
                   audio::load_wav(run_dir / ("mv_" + r[id_col] + ".wav"))});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void cmd_gen_data(const ExperimentConfig& cfg, const StageOptions& opt) {
  const fs::path dir = cfg.output_dir / "data";
  prepare_dir(dir, opt.force);
  StageManifest manifest("gen-data", cfg.output_dir, config_sections(cfg, {"population"}));
  nlohmann::json populations = nlohmann::json::object();
  for (Role role : kAllRoles) {
    Stopwatch sw;
    const voicegen::PopulationSpec spec = population_spec(cfg, role);
    const voicegen::Population pop = voicegen::generate_population(spec);
    CsvWriter speakers({"speaker_id", "gender", "f0_hz", "f1_hz", "f2_hz", "f3_hz", "b1_hz",
                        "b2_hz", "b3_hz", "tilt", "noise_mix"});
    nlohmann::json entries = nlohmann::json::array();
    std::map<std::string, int> gender_counts;
    for (std::size_t s = 0; s < pop.size(); ++s) {
      const voicegen::Speaker& sp = pop.speakers[s];
      const voicegen::SpeakerProfile& p = sp.profile;
      ++gender_counts[gender_name(p.gender)];
      speakers.row({sp.id, gender_name(p.gender), fmt_double(p.f0),
                    fmt_double(p.formants[0].center_hz), fmt_double(p.formants[1].center_hz),
                    fmt_double(p.formants[2].center_hz), fmt_double(p.formants[0].bandwidth_hz),
                    fmt_double(p.formants[1].bandwidth_hz), fmt_double(p.formants[2].bandwidth_hz),
                    fmt_double(p.tilt), fmt_double(p.noise_mix)});
      for (std::size_t j = 0; j < sp.utterance_seeds.size(); ++j) {
        const auto wav = audio::encode_wav(pop.utterance(s, j));
        entries.push_back({{"speaker", sp.id},
                           {"utterance", j},
                           {"seed", sp.utterance_seeds[j]},
                           {"sha256", sha256_hex(std::string_view(
                                          reinterpret_cast<const char*>(wav.data()), wav.size()))}});
      }
      if (role == Role::kSeedVoices) {
        const fs::path wav_path = dir / "seed_voices" / (sp.id + ".wav");
        fs::create_directories(wav_path.parent_path());
        audio::save_wav(pop.utterance(s, 0), wav_path);
        manifest.add_output(wav_path);
      }
    }
    const fs::path csv_path = dir / (to_string(role) + "_speakers.csv");
    speakers.save(csv_path);
    manifest.add_output(csv_path);
    populations[to_string(role)] = {{"num_speakers", spec.num_speakers},
                                    {"utterances_per_speaker", spec.utterances_per_speaker},
                                    {"seed", spec.seed},
                                    {"gender_counts", gender_counts},
                                    {"entries", entries}};
    manifest.time(to_string(role), sw.seconds());
  }
  manifest.set("populations", populations);
  manifest.save(dir);
}

void cmd_train_encoder(const ExperimentConfig& cfg, const StageOptions& opt) {
  const fs::path upstream = check_upstream(cfg, "data", {"population"});
  const fs::path dir = cfg.output_dir / "encoders";
  prepare_dir(dir, opt.force);
  StageManifest manifest("train-encoder", cfg.output_dir,
                         config_sections(cfg, {"population", "encoder"}));
  manifest.add_input(upstream);
  const voicegen::Population train =
      voicegen::generate_population(population_spec(cfg, Role::kTrain));
  nlohmann::json summary = nlohmann::json::object();
  for (const std::string& arch : cfg.encoders) {
    Stopwatch sw;
    const encoder::TrainResult r = train_stock_encoder(cfg, arch, train);
    write_file(encoder_path(cfg, arch), encoder::to_json(r.encoder));
    manifest.add_output(encoder_path(cfg, arch));
    CsvWriter loss({"epoch", "loss"});
    for (std::size_t e = 0; e < r.loss_history.size(); ++e) {
      loss.row({std::to_string(e + 1), fmt_double(r.loss_history[e])});
    }
    const fs::path loss_path = dir / ("loss_" + arch + ".csv");
    loss.save(loss_path);
    manifest.add_output(loss_path);
    summary[arch] = {{"train_accuracy", r.train_accuracy},
                     {"final_loss", r.loss_history.empty() ? 0.0 : r.loss_history.back()}};
    manifest.time(arch, sw.seconds());
  }
  manifest.set("training", summary);
  manifest.save(dir);
}

void cmd_calibrate(const ExperimentConfig& cfg, const StageOptions& opt) {
  const fs::path upstream = check_upstream(cfg, "encoders", {"population", "encoder"});
  const fs::path dir = cfg.output_dir / "calibration";
  prepare_dir(dir, opt.force);
  StageManifest manifest("calibrate", cfg.output_dir,
                         config_sections(cfg, {"population", "encoder", "calibration"}));
  manifest.add_input(upstream);
  const voicegen::Population opt_pop =
      voicegen::generate_population(population_spec(cfg, Role::kOptimization));
  const voicegen::Population test_pop =
      voicegen::generate_population(population_spec(cfg, Role::kTest));
  nlohmann::json thresholds = nlohmann::json::object();
  for (const std::string& arch : cfg.encoders) {
    Stopwatch sw;
    const encoder::ToyEncoder enc = load_encoder(cfg, arch);
    const EmbeddedPopulation e_opt = embed_population(opt_pop, enc, "U_o");
    const EmbeddedPopulation e_test = embed_population(test_pop, enc, "U_t");
    for (const auto& [pop, role] : {std::pair{&e_opt, Role::kOptimization},
                                    std::pair{&e_test, Role::kTest}}) {
      const auto bytes = pop->to_cbor();
      const fs::path p = embedding_path(cfg, arch, role);
      write_file(p, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
      manifest.add_output(p);
    }
    const Calibration cal = calibrate(e_opt, cfg);
    thresholds[arch] = cal.thresholds.to_json();
    for (const auto& [name, curve] : {std::pair{"raw", &cal.raw_roc}, std::pair{"any", &cal.any_roc},
                                      std::pair{"avg", &cal.avg_roc}}) {
      const fs::path p = dir / fmt::format("roc_{}_{}.csv", arch, name);
      roc_csv(*curve).save(p);
      manifest.add_output(p);
    }

    const Gallery gallery = enrollment_gallery(e_opt, std::nullopt, cfg.enrolled);
    std::map<std::string, std::vector<Embedding>> probes;
    for (std::size_t s = 0; s < e_opt.size(); ++s) {
      probes[e_opt.ids[s]].assign(e_opt.embeddings[s].begin() + cfg.enrolled,
                                  e_opt.embeddings[s].end());
    }
    CsvWriter men({"user_id", "gender", "avg_genuine", "avg_impostor"});
    std::map<std::string, Gender> gender_of;
    for (std::size_t s = 0; s < e_opt.size(); ++s) gender_of[e_opt.ids[s]] = e_opt.genders[s];
    if (cfg.probes >= 2) {
      for (const auto& r : verification::menagerie(gallery, probes)) {
        men.row({r.user_id, gender_name(gender_of.at(r.user_id)), fmt_double(r.avg_genuine),
                 fmt_double(r.avg_impostor)});
      }
    }
    const fs::path men_path = dir / fmt::format("menagerie_{}.csv", arch);
    men.save(men_path);
    manifest.add_output(men_path);
    manifest.time(arch, sw.seconds());
  }
  write_json(dir / "thresholds.json", thresholds);
  manifest.add_output(dir / "thresholds.json");
  manifest.save(dir);
}

void cmd_attack(const ExperimentConfig& cfg, const StageOptions& opt) {
  const fs::path upstream =
      check_upstream(cfg, "calibration", {"population", "encoder", "calibration"});
  const AttackJob& job = opt.job;
  if (job.augment && job.domain == attack::Domain::kSpectrogram) {
    throw_config("--augment applies to waveform and clone attacks only");
  }
  const fs::path dir = cfg.output_dir / "attacks" / job.name();
  prepare_dir(dir, opt.force);
  StageManifest manifest(
      "attack", cfg.output_dir,
      config_sections(cfg, {"population", "encoder", "calibration", "attack", "attack.white",
                            "attack.black", "attack.clone", "playback"}));
  manifest.add_input(upstream);

  const auto mode = (job.black_box || job.domain == attack::Domain::kClone)
                        ? encoder::EncoderHandle::Mode::kBlackBox
                        : encoder::EncoderHandle::Mode::kWhiteBox;
  const encoder::EncoderHandle target(shared_encoder(cfg, cfg.target_encoder), mode);
  const EmbeddedPopulation e_opt = load_embeddings(cfg, cfg.target_encoder, Role::kOptimization);
  const Thresholds thr = load_thresholds(cfg).at(cfg.target_encoder);
  const Policy monitor_policy = raw_policy(cfg, thr, cfg.monitor_rule);
  const attack::PlaybackKernels kernels = playback_kernels(cfg);
  const voicegen::CloneModel clone;
  const attack::AttackResources resources = attack_resources(cfg, kernels, clone);

  CsvWriter history({"seed_id", "gender", "epoch", "ir", "objective"});
  CsvWriter results({"seed_id", "gender", "seed_ir", "final_ir", "objective_start",
                     "objective_end", "snr_db"});
  const std::vector<SeedVoice> seeds = seed_voices(cfg);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Stopwatch sw;
    const SeedVoice& seed = seeds[i];
    const Gallery gallery = enrollment_gallery(e_opt, seed.gender, cfg.enrolled);
    const std::vector<Embedding> targets = attack_targets(e_opt, seed.gender, cfg.enrolled);
    const attack::MasterVoice mv =
        run_attack(cfg, job, i, seed, target, targets, {&gallery, monitor_policy}, resources);
    const std::string g = gender_name(seed.gender);
    history.row({seed.id, g, "0", fmt_double(mv.seed_ir), ""});
    for (std::size_t e = 0; e < mv.ir_history.size(); ++e) {
      history.row({seed.id, g, std::to_string(e + 1), fmt_double(mv.ir_history[e]),
                   fmt_double(mv.objective_history[e])});
    }
    results.row({seed.id, g, fmt_double(mv.seed_ir),
                 fmt_double(mv.ir_history.empty() ? mv.seed_ir : mv.ir_history.back()),
                 fmt_double(mv.objective_history.empty() ? 0.0 : mv.objective_history.front()),
                 fmt_double(mv.objective_history.empty() ? 0.0 : mv.objective_history.back()),
                 fmt_double(mv.distortion_snr)});
    const fs::path sv_path = dir / ("sv_" + seed.id + ".wav");
    const fs::path mv_path = dir / ("mv_" + seed.id + ".wav");
    audio::save_wav(seed.waveform, sv_path, audio::WavEncoding::kFloat32);
    audio::save_wav(mv.waveform, mv_path, audio::WavEncoding::kFloat32);
    manifest.add_output(sv_path);
    manifest.add_output(mv_path);
    manifest.time(seed.id, sw.seconds());
  }
  history.save(dir / "ir_history.csv");
  results.save(dir / "results.csv");
  manifest.add_output(dir / "ir_history.csv");
  manifest.add_output(dir / "results.csv");
  manifest.set("run", {{"name", job.name()},
                       {"domain", attack::to_string(job.domain)},
                       {"threat", job.black_box ? "black" : "white"},
                       {"augment", job.augment},
                       {"target_encoder", cfg.target_encoder},
                       {"monitor_policy", policy_label(cfg.monitor_rule, cfg.enrolled)},
                       {"monitor_threshold", monitor_policy.tau}});
  manifest.save(dir);
}

void cmd_evaluate(const ExperimentConfig& cfg, const StageOptions& opt) {
  const fs::path upstream =
      check_upstream(cfg, "calibration", {"population", "encoder", "calibration"});
  const std::vector<fs::path> runs = attack_runs(cfg);
  if (runs.empty()) throw_precondition("no attack runs found; run the 'attack' stage first");
  const fs::path dir = cfg.output_dir / "evaluate";
  prepare_dir(dir, opt.force);
  StageManifest manifest("evaluate", cfg.output_dir,
                         config_sections(cfg, {"population", "encoder", "calibration"}));
  manifest.add_input(upstream);
  for (const fs::path& r : runs) manifest.add_input(r / "manifest.json");
  manifest.set("transfer", opt.transfer);

  const auto thresholds = load_thresholds(cfg);
  CsvWriter table({"run", "encoder", "gender", "policy", "threshold", "population", "seeds",
                   "sv_ir", "mv_ir"});
  CsvWriter per_seed({"run", "encoder", "seed_id", "gender", "policy", "threshold", "population",
                      "sv_ir", "mv_ir"});
  CsvWriter transfer({"run", "target_encoder", "test_encoder", "gender", "sv_ir", "mv_ir"});

  std::vector<std::string> eval_encoders =
      opt.transfer ? cfg.encoders : std::vector<std::string>{cfg.target_encoder};
  for (const std::string& arch : eval_encoders) {
    Stopwatch sw;
    const encoder::EncoderHandle handle(shared_encoder(cfg, arch),
                                        encoder::EncoderHandle::Mode::kWhiteBox);
    const Thresholds& thr = thresholds.at(arch);
    const EmbeddedPopulation e_opt = load_embeddings(cfg, arch, Role::kOptimization);
    const EmbeddedPopulation e_test = load_embeddings(cfg, arch, Role::kTest);
    std::map<std::pair<std::string, Gender>, Gallery> galleries;
    for (Gender g : {Gender::kA, Gender::kB}) {
      galleries.emplace(std::pair{std::string("optimization"), g},
                        enrollment_gallery(e_opt, g, cfg.enrolled));
      galleries.emplace(std::pair{std::string("test"), g},
                        enrollment_gallery(e_test, g, cfg.enrolled));
    }
    for (const fs::path& run_dir : runs) {
      const std::string run = run_dir.filename().string();
      const std::string run_target =
          read_json(run_dir / "manifest.json").at("run").at("target_encoder").get<std::string>();
      const std::vector<RunSeed> seeds = load_run(run_dir);
      std::vector<Embedding> sv, mv;
      for (const auto& s : seeds) {
        sv.push_back(handle.embed(s.seed));
        mv.push_back(handle.embed(s.master));
      }
      for (ScoringRule rule : kRules) {
        for (const std::string thr_label : {"raw-far", "policy-far", "raw-eer"}) {
          Policy policy = thr_label == "policy-far" ? calibrated_policy(cfg, thr, rule)
                                                    : raw_policy(cfg, thr, rule);
          if (thr_label == "raw-eer") policy.tau = thr.raw.eer_threshold;
          for (const std::string pop : {"optimization", "test"}) {
            for (Gender g : {Gender::kA, Gender::kB}) {
              const Gallery& gallery = galleries.at({pop, g});
              double sv_sum = 0.0, mv_sum = 0.0;
              int count = 0;
              for (std::size_t i = 0; i < seeds.size(); ++i) {
                if (seeds[i].gender != g) continue;
                const double a = verification::impersonation_rate(std::span(&sv[i], 1), gallery, policy);
                const double b = verification::impersonation_rate(std::span(&mv[i], 1), gallery, policy);
                per_seed.row({run, arch, seeds[i].id, gender_name(g), policy_label(rule, cfg.enrolled),
                              thr_label, pop, fmt_double(a), fmt_double(b)});
                sv_sum += a;
                mv_sum += b;
                ++count;
              }
              if (count == 0) continue;
              const double sv_mean = sv_sum / count, mv_mean = mv_sum / count;
              table.row({run, arch, gender_name(g), policy_label(rule, cfg.enrolled), thr_label, pop,
                         std::to_string(count), fmt_double(sv_mean), fmt_double(mv_mean)});
              if (opt.transfer && rule == ScoringRule::kAvg && thr_label == "raw-far" && pop == "test") {
                transfer.row({run, run_target, arch, gender_name(g), fmt_double(sv_mean),
                              fmt_double(mv_mean)});
              }
            }
          }
        }
      }
    }
    manifest.time(arch, sw.seconds());
  }
  table.save(dir / "ir_table.csv");
  per_seed.save(dir / "ir_per_seed.csv");
  manifest.add_output(dir / "ir_table.csv");
  manifest.add_output(dir / "ir_per_seed.csv");
  if (opt.transfer) {
    transfer.save(dir / "transfer.csv");
    manifest.add_output(dir / "transfer.csv");

    // Rank agreement of per-user false acceptance across encoders.
    for (Gender g : {Gender::kA, Gender::kB}) {
      std::vector<std::vector<double>> far_by_encoder;
      for (const std::string& arch : cfg.encoders) {
        const EmbeddedPopulation e_test = load_embeddings(cfg, arch, Role::kTest);
        const Gallery gallery = enrollment_gallery(e_test, g, cfg.enrolled);
        const Policy policy = raw_policy(cfg, thresholds.at(arch), ScoringRule::kAvg);
        const auto members = e_test.speakers_of(g);
        std::vector<double> far(members.size(), 0.0);
        for (std::size_t u = 0; u < members.size(); ++u) {
          int trials = 0, accepted = 0;
          for (std::size_t v = 0; v < members.size(); ++v) {
            if (v == u) continue;
            const auto& rows = e_test.embeddings[members[v]];
            for (std::size_t j = static_cast<std::size_t>(cfg.enrolled); j < rows.size(); ++j) {
              ++trials;
              accepted += verification::verify(rows[j], gallery, u, policy) ? 1 : 0;
            }
          }
          far[u] = trials ? static_cast<double>(accepted) / trials : 0.0;
        }
        far_by_encoder.push_back(std::move(far));
      }
      std::vector<std::string> header{"encoder"};
      header.insert(header.end(), cfg.encoders.begin(), cfg.encoders.end());
      CsvWriter rho(header);
      for (std::size_t a = 0; a < cfg.encoders.size(); ++a) {
        std::vector<std::string> row{cfg.encoders[a]};
        for (std::size_t b = 0; b < cfg.encoders.size(); ++b) {
          double v = std::numeric_limits<double>::quiet_NaN();
          try {
            v = a == b ? 1.0 : verification::spearman(far_by_encoder[a], far_by_encoder[b]);
          } catch (const Error&) {
            // Constant FAR vectors have no rank correlation.
          }
          row.push_back(fmt_double(v));
        }
        rho.row(row);
      }
      const fs::path p = dir / ("spearman_" + gender_name(g) + ".csv");
      rho.save(p);
      manifest.add_output(p);
    }
  }
  manifest.save(dir);
}

void cmd_coverage(const ExperimentConfig& cfg, const StageOptions& opt) {
  const fs::path upstream =
      check_upstream(cfg, "calibration", {"population", "encoder", "calibration"});
  const fs::path run_dir = cfg.output_dir / "attacks" / cfg.coverage_run;
  if (!fs::exists(run_dir / "manifest.json")) {
    throw_precondition("coverage.run '" + cfg.coverage_run + "' has no attack artifacts");
  }
  const fs::path dir = cfg.output_dir / "coverage";
  prepare_dir(dir, opt.force);
  StageManifest manifest("coverage", cfg.output_dir,
                         config_sections(cfg, {"population", "encoder", "calibration", "coverage"}));
  manifest.add_input(upstream);
  manifest.add_input(run_dir / "manifest.json");

  const std::string arch =
      read_json(run_dir / "manifest.json").at("run").at("target_encoder").get<std::string>();
  const encoder::EncoderHandle handle(shared_encoder(cfg, arch),
                                      encoder::EncoderHandle::Mode::kWhiteBox);
  const Policy policy = raw_policy(cfg, load_thresholds(cfg).at(arch), ScoringRule::kAvg);
  const EmbeddedPopulation e_opt = load_embeddings(cfg, arch, Role::kOptimization);
  const EmbeddedPopulation e_test = load_embeddings(cfg, arch, Role::kTest);
  const std::vector<RunSeed> seeds = load_run(run_dir);

  nlohmann::json selections = nlohmann::json::object();
  const std::vector<std::pair<std::string, std::optional<Gender>>> groups{
      {"A", Gender::kA}, {"B", Gender::kB}, {"mixed", std::nullopt}};
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& [label, g] = groups[gi];
    Stopwatch sw;
    const Gallery g_opt = enrollment_gallery(e_opt, g, cfg.enrolled);
    const Gallery g_test = enrollment_gallery(e_test, g, cfg.enrolled);
    CsvWriter curves({"gender", "voice", "strategy", "population", "attempt", "ir_mean", "ir_std"});
    for (const bool master : {false, true}) {
      std::vector<Embedding> cands;
      std::vector<std::string> ids;
      for (const auto& s : seeds) {
        if (g && s.gender != *g) continue;
        cands.push_back(handle.embed(master ? s.master : s.seed));
        ids.push_back(s.id);
      }
      if (cands.empty()) continue;
      const std::string voice = master ? "master" : "seed";
      const auto result = bootstrap_coverage(cands, g_opt, g_test, policy, cfg.attempts,
                                             cfg.bootstrap_repetitions, cfg.subset_fraction,
                                             mix_seed(cfg.coverage_seed, gi));
      for (const auto& [strategy, c] : result) {
        for (int a = 0; a < cfg.attempts; ++a) {
          const auto i = static_cast<std::size_t>(a);
          curves.row({label, voice, to_string(strategy), "optimization", std::to_string(a + 1),
                      fmt_double(c.optimization_mean[i]), fmt_double(c.optimization_std[i])});
          curves.row({label, voice, to_string(strategy), "test", std::to_string(a + 1),
                      fmt_double(c.test_mean[i]), fmt_double(c.test_std[i])});
        }
      }
      const coverage::ImpersonationMatrix b =
          coverage::impersonation_matrix(cands, ids, g_opt, policy);
      auto chosen_ids = [&](const coverage::SelectionResult& r) {
        std::vector<std::string> out;
        for (std::size_t k : r.chosen) out.push_back(ids[k]);
        return out;
      };
      selections[label][voice] = {
          {"ind", chosen_ids(coverage::select_independent(b, cfg.attempts))},
          {"comp", chosen_ids(coverage::select_complementary(b, cfg.attempts))}};
    }
    const fs::path p = dir / ("curves_" + label + ".csv");
    curves.save(p);
    manifest.add_output(p);
    manifest.time(label, sw.seconds());
  }
  write_json(dir / "selection.json", selections);
  manifest.add_output(dir / "selection.json");
  manifest.save(dir);
}

// ---------------------------------------------------------------------------
// report

namespace {

double to_num(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::vector<double> column(const CsvTable& t, const std::string& name,
                           const std::vector<std::size_t>& rows) {
  const std::size_t c = t.column(name);
  std::vector<double> out;
  for (std::size_t r : rows) out.push_back(to_num(t.rows[r][c]));
  return out;
}

std::vector<std::size_t> all_rows(const CsvTable& t) {
  std::vector<std::size_t> r(t.rows.size());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// Groups row indices by the joined values of the given columns.
std::map<std::string, std::vector<std::size_t>> group_by(const CsvTable& t,
                                                         const std::vector<std::string>& cols,
                                                         const std::vector<std::size_t>& rows) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t r : rows) {
    std::string key;
    for (const auto& c : cols) key += (key.empty() ? "" : " ") + t.rows[r][t.column(c)];
    out[key].push_back(r);
  }
  return out;
}

std::vector<std::size_t> where(const CsvTable& t, const std::string& col, const std::string& value) {
  std::vector<std::size_t> out;
  const std::size_t c = t.column(col);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r][c] == value) out.push_back(r);
  }
  return out;
}

// At most `limit` evenly spaced rows, always keeping the last.
std::vector<std::size_t> thin(std::vector<std::size_t> rows, std::size_t limit) {
  if (rows.size() <= limit) return rows;
  std::vector<std::size_t> out;
  const double step = static_cast<double>(rows.size() - 1) / static_cast<double>(limit - 1);
  for (std::size_t i = 0; i < limit; ++i) {
    out.push_back(rows[static_cast<std::size_t>(std::lround(step * static_cast<double>(i)))]);
  }
  return out;
}

SvgPlot render_csv(const fs::path& rel, const CsvTable& t) {
  const std::string name = rel.filename().string();
  const std::string title = rel.generic_string();
  const auto rows = all_rows(t);
  using Style = SvgPlot::Style;
  if (name.starts_with("loss_")) {
    SvgPlot p(title, "epoch", "cross-entropy");
    p.add_series("loss", column(t, "epoch", rows), column(t, "loss", rows));
    return p;
  }
  if (name.starts_with("roc_")) {
    SvgPlot p(title, "false acceptance rate", "false rejection rate");
    const auto r = thin(rows, 1500);
    p.add_series("roc", column(t, "far", r), column(t, "frr", r));
    return p;
  }
  if (name.starts_with("menagerie_")) {
    SvgPlot p(title, "mean impostor score", "mean genuine score");
    for (const auto& [g, r] : group_by(t, {"gender"}, rows)) {
      p.add_series("gender " + g, column(t, "avg_impostor", r), column(t, "avg_genuine", r),
                   Style::kPoints);
    }
    return p;
  }
  if (name.ends_with("_speakers.csv")) {
    SvgPlot p(title, "f0 (Hz)", "F1 (Hz)");
    for (const auto& [g, r] : group_by(t, {"gender"}, rows)) {
      p.add_series("gender " + g, column(t, "f0_hz", r), column(t, "f1_hz", r), Style::kPoints);
    }
    return p;
  }
  if (name == "ir_history.csv") {
    SvgPlot p(title, "epoch", "impersonation rate");
    for (const auto& [id, r] : group_by(t, {"seed_id"}, rows)) {
      p.add_series(id, column(t, "epoch", r), column(t, "ir", r));
    }
    return p;
  }
  if (name == "results.csv") {
    SvgPlot p(title, "seed voice IR", "master voice IR");
    p.add_diagonal();
    for (const auto& [g, r] : group_by(t, {"gender"}, rows)) {
      p.add_series("gender " + g, column(t, "seed_ir", r), column(t, "final_ir", r), Style::kPoints);
    }
    return p;
  }
  if (name == "ir_table.csv" || name == "ir_per_seed.csv" || name == "transfer.csv") {
    SvgPlot p(title, "seed voice IR", "master voice IR");
    p.add_diagonal();
    const std::string key = name == "transfer.csv" ? "test_encoder" : "population";
    for (const auto& [k, r] : group_by(t, {key}, rows)) {
      p.add_series(k, column(t, "sv_ir", r), column(t, "mv_ir", r), Style::kPoints);
    }
    return p;
  }
  if (name.starts_with("spearman_")) {
    SvgPlot p(title, "encoder index", "rank correlation");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      std::vector<double> x, y;
      for (std::size_t c = 1; c < t.header.size(); ++c) {
        x.push_back(static_cast<double>(c - 1));
        y.push_back(to_num(t.rows[r][c]));
      }
      p.add_series(t.rows[r][0], x, y, Style::kPoints);
    }
    return p;
  }
  if (name.starts_with("curves_")) {
    SvgPlot p(title, "attempt", "impersonation rate (test users)");
    for (const auto& [k, r] : group_by(t, {"voice", "strategy"}, where(t, "population", "test"))) {
      p.add_series(k, column(t, "attempt", r), column(t, "ir_mean", r));
    }
    return p;
  }
  // Generic: every numeric column against the row index.
  SvgPlot p(title, "row", "value");
  std::vector<double> x;
  for (std::size_t r = 0; r < t.rows.size(); ++r) x.push_back(static_cast<double>(r));
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    std::vector<double> y = column(t, t.header[c], rows);
    if (std::any_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); })) {
      p.add_series(t.header[c], x, y);
    }
  }
  return p;
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

void cmd_report(const ExperimentConfig& cfg, const StageOptions& opt) {
  const fs::path upstream =
      check_upstream(cfg, "calibration", {"population", "encoder", "calibration"});
  const fs::path dir = cfg.output_dir / "report";
  prepare_dir(dir, opt.force);
  StageManifest manifest("report", cfg.output_dir, cfg.to_json());
  manifest.add_input(upstream);

  std::vector<fs::path> csvs;
  std::set<std::string> stages;
  for (const auto& e : fs::recursive_directory_iterator(cfg.output_dir)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), cfg.output_dir);
    const std::string top = rel.begin()->string();
    if (top == "report") continue;
    if (e.path().filename() == "manifest.json") stages.insert(rel.parent_path().generic_string());
    if (e.path().extension() == ".csv") csvs.push_back(rel);
  }
  std::sort(csvs.begin(), csvs.end());

  nlohmann::json plots = nlohmann::json::array();
  for (const fs::path& rel : csvs) {
    const CsvTable t = read_csv(cfg.output_dir / rel);
    std::string flat = rel.generic_string();
    std::replace(flat.begin(), flat.end(), '/', '_');
    const fs::path svg = dir / (fs::path(flat).replace_extension(".svg"));
    write_file(svg, render_csv(rel, t).render());
    manifest.add_output(svg);
    plots.push_back({{"csv", rel.generic_string()},
                     {"svg", fs::relative(svg, cfg.output_dir).generic_string()}});
  }

  nlohmann::json summary;
  summary["tool_version"] = std::string(kToolVersion);
  summary["stages"] = std::vector<std::string>(stages.begin(), stages.end());
  nlohmann::json encoders = nlohmann::json::object();
  for (const auto& [arch, thr] : load_thresholds(cfg)) {
    encoders[arch] = {{"eer", thr.raw.eer},
                      {"auc", thr.raw.auc},
                      {"raw_far_threshold", thr.raw.far_threshold},
                      {"any_far_threshold", thr.any.far_threshold},
                      {"avg_far_threshold", thr.avg.far_threshold},
                      {"eer_threshold", thr.raw.eer_threshold}};
  }
  summary["encoders"] = encoders;

  nlohmann::json attacks = nlohmann::json::object();
  for (const fs::path& run_dir : attack_runs(cfg)) {
    const nlohmann::json run = read_json(run_dir / "manifest.json").at("run");
    const CsvTable t = read_csv(run_dir / "results.csv");
    nlohmann::json by_gender = nlohmann::json::object();
    for (const auto& [g, r] : group_by(t, {"gender"}, all_rows(t))) {
      const auto sv = column(t, "seed_ir", r), mv = column(t, "final_ir", r);
      by_gender[g] = {{"seeds", r.size()},
                      {"seed_ir", number_or_null(std::accumulate(sv.begin(), sv.end(), 0.0) / sv.size())},
                      {"final_ir", number_or_null(std::accumulate(mv.begin(), mv.end(), 0.0) / mv.size())}};
    }
    attacks[run_dir.filename().string()] = {{"target_encoder", run.at("target_encoder")},
                                            {"monitor_policy", run.at("monitor_policy")},
                                            {"by_gender", by_gender}};
  }
  summary["attacks"] = attacks;

  nlohmann::json evaluation = nlohmann::json::array();
  if (fs::exists(cfg.output_dir / "evaluate" / "ir_table.csv")) {
    const CsvTable t = read_csv(cfg.output_dir / "evaluate" / "ir_table.csv");
    for (const auto& r : t.rows) {
      if (r[t.column("threshold")] != "raw-far" || r[t.column("population")] != "test") continue;
      evaluation.push_back({{"run", r[t.column("run")]},
                            {"encoder", r[t.column("encoder")]},
                            {"gender", r[t.column("gender")]},
                            {"policy", r[t.column("policy")]},
                            {"sv_ir", number_or_null(to_num(r[t.column("sv_ir")]))},
                            {"mv_ir", number_or_null(to_num(r[t.column("mv_ir")]))}});
    }
  }
  summary["evaluation"] = evaluation;

  nlohmann::json cov = nlohmann::json::array();
  for (const char* label : {"A", "B", "mixed"}) {
    const fs::path p = cfg.output_dir / "coverage" / (std::string("curves_") + label + ".csv");
    if (!fs::exists(p)) continue;
    const CsvTable t = read_csv(p);
    for (const auto& r : t.rows) {
      if (r[t.column("population")] != "test" ||
          std::stoi(r[t.column("attempt")]) != cfg.attempts) {
        continue;
      }
      cov.push_back({{"gender", label},
                     {"voice", r[t.column("voice")]},
                     {"strategy", r[t.column("strategy")]},
                     {"ir", number_or_null(to_num(r[t.column("ir_mean")]))}});
    }
  }
  summary["coverage"] = cov;
  summary["plots"] = plots;
  write_json(dir / "summary.json", summary);
  manifest.add_output(dir / "summary.json");
  manifest.save(dir);
}

}  // namespace mvforge::harness
