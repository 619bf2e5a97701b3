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

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvforge/encoder.hpp"

namespace mvforge::verification {

using encoder::Embedding;

/// Enrolled embeddings per user plus their (un-normalized) arithmetic means.
class Gallery {
 public:
  explicit Gallery(int n, std::string population_id = "U_o");

  /// Exactly n unit-norm embeddings; all-or-nothing.
  void enroll(const std::string& user_id, std::vector<Embedding> embeddings);

  int n() const { return n_; }
  std::size_t size() const { return users_.size(); }
  bool empty() const { return users_.empty(); }
  const std::string& population_id() const { return population_id_; }
  /// Users in enrollment order.
  const std::vector<std::string>& users() const { return users_; }
  bool contains(const std::string& user_id) const { return index_.count(user_id) != 0; }

  const std::vector<Embedding>& entries(const std::string& user_id) const;
  const Eigen::VectorXd& mean(const std::string& user_id) const;
  const std::vector<Embedding>& entries(std::size_t user_index) const { return entries_[user_index]; }
  const Eigen::VectorXd& mean(std::size_t user_index) const { return means_[user_index]; }

  /// Restriction to a subset of users (by index), preserving order.
  Gallery subset(std::span<const std::size_t> user_indices) const;

 private:
  std::size_t index_of(const std::string& user_id) const;

  int n_;
  std::string population_id_;
  std::vector<std::string> users_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<Embedding>> entries_;
  std::vector<Eigen::VectorXd> means_;
};

enum class ScoringRule { kAny, kAvg };

std::string to_string(ScoringRule rule);

struct Policy {
  ScoringRule rule = ScoringRule::kAvg;
  int n = 10;
  double tau = 0.0;
  /// Re-normalize the enrolled mean before the avg-n dot product.
  bool normalize_avg = false;

  void validate() const;
};

/// any: max cosine over the enrolled embeddings; avg: dot with the mean.
double score(const Embedding& f, const Gallery& gallery, const std::string& user_id,
             ScoringRule rule, bool normalize_avg = false);
double score(const Embedding& f, const Gallery& gallery, std::size_t user_index, ScoringRule rule,
             bool normalize_avg = false);

/// Strict: score > tau.
bool verify(const Embedding& f, const Gallery& gallery, const std::string& user_id,
            const Policy& policy);
bool verify(const Embedding& f, const Gallery& gallery, std::size_t user_index,
            const Policy& policy);

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

struct Trial {
  Embedding probe;
  std::string claimed_user;
  bool genuine = false;
};

ScoreSet collect_scores(const Gallery& gallery, std::span<const Trial> trials, ScoringRule rule,
                        bool normalize_avg = false);

struct RocPoint {
  double threshold;
  double far;  // fraction of impostor scores > threshold
  double frr;  // fraction of genuine scores <= threshold
};

/// Exact empirical ROC on all distinct scores plus one threshold below every
/// score, ascending in threshold.
std::vector<RocPoint> roc(const ScoreSet& scores);
double auc(std::span<const RocPoint> curve);

struct EerPoint {
  double eer;
  double threshold;
};
/// Threshold minimizing |FAR - FRR| (lowest such threshold); eer = (FAR+FRR)/2.
EerPoint eer(std::span<const RocPoint> curve);
/// Smallest threshold with FAR <= target_far.
double threshold_at_far(std::span<const RocPoint> curve, double target_far);

/// (1/|U|) sum_u min(1, sum_w verify(w, u)).
double impersonation_rate(std::span<const Embedding> samples, const Gallery& gallery,
                          const Policy& policy);
/// Per-user match indicator for a single sample.
std::vector<bool> matched_users(const Embedding& sample, const Gallery& gallery,
                                const Policy& policy);

struct MenagerieRecord {
  std::string user_id;
  double avg_genuine;
  double avg_impostor;
};

/// avg_genuine: mean cosine of a user's probes to their own enrollment;
/// avg_impostor: mean cosine of those probes to every other user's enrollment.
std::vector<MenagerieRecord> menagerie(
    const Gallery& gallery, const std::map<std::string, std::vector<Embedding>>& probes_by_user);

/// Pearson correlation of fractional ranks (ties share their average rank).
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace mvforge::verification
