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

#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mvforge/errors.hpp"

namespace mvforge::harness {
namespace {

namespace pt = boost::property_tree;

// Reads typed values and records which keys were consumed.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  template <typename T>
  void get(const std::string& section, const std::string& key, T& out) {
    seen_[section].insert(key);
    const auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\0'));
    if (!sec) return;
    const auto value = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!value) return;
    out = convert<T>(*value, section + "." + key);
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      const auto it = seen_.find(section);
      if (it == seen_.end()) throw_config("unknown config section [" + section + "]");
      for (const auto& [key, value] : body) {
        if (!it->second.count(key)) throw_config("unknown config key " + section + "." + key);
      }
    }
  }

 private:
  template <typename T>
  static T convert(const std::string& text, const std::string& where) {
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw_config(where + ": expected a boolean, got '" + text + "'");
    } else {
      std::istringstream in(text);
      T v{};
      in >> v;
      if (!in || !(in >> std::ws).eof()) {
        throw_config(where + ": cannot parse '" + text + "'");
      }
      return v;
    }
  }

  const pt::ptree& tree_;
  std::map<std::string, std::set<std::string>> seen_;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

void read_attack(Reader& r, const std::string& section, AttackSettings& s) {
  std::string norm = attack::to_string(s.norm_mode);
  r.get(section, "step_size", s.step_size);
  r.get(section, "epochs", s.epochs);
  r.get(section, "batch_size", s.batch_size);
  r.get(section, "norm", norm);
  r.get(section, "linf_budget", s.linf_budget);
  r.get(section, "nes_samples", s.nes.samples);
  r.get(section, "nes_sigma", s.nes.sigma);
  try {
    s.norm_mode = attack::norm_mode_from_string(norm);
  } catch (const Error& e) {
    throw_config(section + ".norm: " + e.what());
  }
}

nlohmann::json attack_json(const AttackSettings& s) {
  return {{"step_size", s.step_size},
          {"epochs", s.epochs},
          {"batch_size", s.batch_size},
          {"norm", attack::to_string(s.norm_mode)},
          {"linf_budget", s.linf_budget},
          {"nes_samples", s.nes.samples},
          {"nes_sigma", s.nes.sigma}};
}

void validate_attack(const std::string& name, const AttackSettings& s) {
  attack::AttackConfig cfg;
  cfg.step_size = s.step_size;
  cfg.epochs = s.epochs;
  cfg.batch_size = s.batch_size;
  cfg.norm_mode = s.norm_mode;
  cfg.linf_budget = s.linf_budget;
  try {
    cfg.validate();
    s.nes.validate();
  } catch (const Error& e) {
    throw_config("[" + name + "]: " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw_config(msg);
  };
  check(speakers_per_gender >= 2, "population.speakers_per_gender must be at least 2");
  check(train_speakers_per_gender >= 1, "population.train_speakers_per_gender must be positive");
  check(train_utterances >= 2, "population.train_utterances must be at least 2");
  check(enrolled >= 1, "population.enrolled must be positive");
  check(probes >= 1, "population.probes must be positive");
  check(seeds_per_gender >= 1, "population.seeds_per_gender must be positive");
  check(optimization_seed != test_seed,
        "optimization and test populations need different seeds");
  check(train_seed != optimization_seed && train_seed != test_seed,
        "the training population needs its own seed");
  check(!encoders.empty(), "encoder.archs must name at least one encoder");
  const auto stock = encoder::stock_arch_ids();
  for (const auto& id : encoders) {
    check(std::find(stock.begin(), stock.end(), id) != stock.end(),
          "unknown encoder architecture '" + id + "'");
  }
  check(std::set<std::string>(encoders.begin(), encoders.end()).size() == encoders.size(),
        "encoder.archs lists an architecture twice");
  check(std::find(encoders.begin(), encoders.end(), target_encoder) != encoders.end(),
        "attack.encoder must be one of encoder.archs");
  check(embed_dim >= 2 && hidden_dim >= 1, "encoder dimensions must be positive");
  check(train_epochs >= 1, "encoder.epochs must be positive");
  check(learning_rate > 0.0 && logit_scale > 0.0, "encoder learning rate and scale must be positive");
  check(far_target > 0.0 && far_target < 1.0, "calibration.far_target must lie in (0, 1)");
  check(griffin_lim_iters >= 1, "attack.griffin_lim_iters must be positive");
  validate_attack("attack.white", white);
  validate_attack("attack.black", black);
  validate_attack("attack.clone", clone);
  check(!clone_prompt.empty(), "attack.clone prompt must not be empty");
  check(clone_prompt.find_first_not_of("abcdefghijklmnopqrstuvwxyz ") == std::string::npos,
        "attack.clone prompt may contain only lowercase letters and spaces");
  check(playback_noise_sigma >= 0.0, "playback.noise_sigma must be nonnegative");
  check(playback_trials >= 1, "playback.trials must be positive");
  check(attempts >= 1, "coverage.attempts must be positive");
  check(bootstrap_repetitions >= 1, "coverage.bootstrap must be positive");
  check(subset_fraction > 0.0 && subset_fraction <= 1.0, "coverage.subset_fraction must lie in (0, 1]");
}

nlohmann::json ExperimentConfig::to_json() const {
  return {
      {"population",
       {{"speakers_per_gender", speakers_per_gender},
        {"train_speakers_per_gender", train_speakers_per_gender},
        {"train_utterances", train_utterances},
        {"enrolled", enrolled},
        {"probes", probes},
        {"seeds_per_gender", seeds_per_gender},
        {"train_seed", train_seed},
        {"optimization_seed", optimization_seed},
        {"test_seed", test_seed},
        {"seed_voice_seed", seed_voice_seed}}},
      {"encoder",
       {{"archs", encoders},
        {"embed_dim", embed_dim},
        {"hidden_dim", hidden_dim},
        {"epochs", train_epochs},
        {"learning_rate", learning_rate},
        {"logit_scale", logit_scale},
        {"seed", training_seed}}},
      {"calibration", {{"far_target", far_target}, {"normalize_avg", normalize_avg}}},
      {"attack",
       {{"encoder", target_encoder},
        {"monitor_policy", verification::to_string(monitor_rule)},
        {"seed", attack_seed},
        {"griffin_lim_iters", griffin_lim_iters},
        {"prompt", clone_prompt}}},
      {"attack.white", attack_json(white)},
      {"attack.black", attack_json(black)},
      {"attack.clone", attack_json(clone)},
      {"playback",
       {{"noise_sigma", playback_noise_sigma}, {"seed", playback_seed}, {"trials", playback_trials}}},
      {"coverage",
       {{"attempts", attempts},
        {"bootstrap", bootstrap_repetitions},
        {"subset_fraction", subset_fraction},
        {"seed", coverage_seed},
        {"run", coverage_run}}},
  };
}

ExperimentConfig parse_config(const std::string& ini_text) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw_config(std::string("malformed config: ") + e.what());
  }
  ExperimentConfig c;
  Reader r(tree);
  std::string dir = c.output_dir.string();
  r.get("output", "dir", dir);
  c.output_dir = dir;

  r.get("population", "speakers_per_gender", c.speakers_per_gender);
  r.get("population", "train_speakers_per_gender", c.train_speakers_per_gender);
  r.get("population", "train_utterances", c.train_utterances);
  r.get("population", "enrolled", c.enrolled);
  r.get("population", "probes", c.probes);
  r.get("population", "seeds_per_gender", c.seeds_per_gender);
  r.get("population", "train_seed", c.train_seed);
  r.get("population", "optimization_seed", c.optimization_seed);
  r.get("population", "test_seed", c.test_seed);
  r.get("population", "seed_voice_seed", c.seed_voice_seed);

  std::string archs;
  r.get("encoder", "archs", archs);
  if (!archs.empty()) c.encoders = split_list(archs);
  r.get("encoder", "embed_dim", c.embed_dim);
  r.get("encoder", "hidden_dim", c.hidden_dim);
  r.get("encoder", "epochs", c.train_epochs);
  r.get("encoder", "learning_rate", c.learning_rate);
  r.get("encoder", "logit_scale", c.logit_scale);
  r.get("encoder", "seed", c.training_seed);

  r.get("calibration", "far_target", c.far_target);
  r.get("calibration", "normalize_avg", c.normalize_avg);

  std::string monitor = verification::to_string(c.monitor_rule);
  r.get("attack", "encoder", c.target_encoder);
  r.get("attack", "monitor_policy", monitor);
  r.get("attack", "seed", c.attack_seed);
  r.get("attack", "griffin_lim_iters", c.griffin_lim_iters);
  r.get("attack", "prompt", c.clone_prompt);
  if (monitor == "any") {
    c.monitor_rule = verification::ScoringRule::kAny;
  } else if (monitor == "avg") {
    c.monitor_rule = verification::ScoringRule::kAvg;
  } else {
    throw_config("attack.monitor_policy must be 'any' or 'avg'");
  }
  read_attack(r, "attack.white", c.white);
  read_attack(r, "attack.black", c.black);
  read_attack(r, "attack.clone", c.clone);

  r.get("playback", "noise_sigma", c.playback_noise_sigma);
  r.get("playback", "seed", c.playback_seed);
  r.get("playback", "trials", c.playback_trials);

  r.get("coverage", "attempts", c.attempts);
  r.get("coverage", "bootstrap", c.bootstrap_repetitions);
  r.get("coverage", "subset_fraction", c.subset_fraction);
  r.get("coverage", "seed", c.coverage_seed);
  r.get("coverage", "run", c.coverage_run);

  r.reject_unknown();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_config("cannot read config file " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  ExperimentConfig c = parse_config(text.str());
  if (c.output_dir.is_relative()) c.output_dir = path.parent_path() / c.output_dir;
  return c;
}

}  // namespace mvforge::harness
