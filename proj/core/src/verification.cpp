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

#include "mvforge/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mvforge/errors.hpp"

namespace mvforge::verification {
namespace {

constexpr double kUnitNormTol = 1e-6;

std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Gallery::Gallery(int n, std::string population_id) : n_(n), population_id_(std::move(population_id)) {
  require(n >= 1, "gallery needs n >= 1 enrolled samples per user");
}

void Gallery::enroll(const std::string& user_id, std::vector<Embedding> embeddings) {
  require(!contains(user_id), "user '" + user_id + "' is already enrolled");
  require(static_cast<int>(embeddings.size()) == n_,
          "enrollment needs exactly " + std::to_string(n_) + " embeddings, got " +
              std::to_string(embeddings.size()));
  const Eigen::Index dim = embeddings.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& e : embeddings) {
    require(e.size() == dim, "enrolled embeddings have inconsistent dimensions");
    require(std::abs(e.norm() - 1.0) <= kUnitNormTol, "enrolled embeddings must be unit norm");
    mean += e;
  }
  if (!means_.empty()) require(dim == means_.front().size(), "embedding dimension differs from gallery");
  mean /= static_cast<double>(n_);
  index_.emplace(user_id, users_.size());
  users_.push_back(user_id);
  entries_.push_back(std::move(embeddings));
  means_.push_back(std::move(mean));
}

std::size_t Gallery::index_of(const std::string& user_id) const {
  auto it = index_.find(user_id);
  require(it != index_.end(), "unknown user '" + user_id + "'");
  return it->second;
}

const std::vector<Embedding>& Gallery::entries(const std::string& user_id) const {
  return entries_[index_of(user_id)];
}

const Eigen::VectorXd& Gallery::mean(const std::string& user_id) const {
  return means_[index_of(user_id)];
}

Gallery Gallery::subset(std::span<const std::size_t> user_indices) const {
  Gallery out(n_, population_id_);
  for (std::size_t i : user_indices) {
    require(i < users_.size(), "user index out of range");
    out.index_.emplace(users_[i], out.users_.size());
    out.users_.push_back(users_[i]);
    out.entries_.push_back(entries_[i]);
    out.means_.push_back(means_[i]);
  }
  return out;
}

std::string to_string(ScoringRule rule) { return rule == ScoringRule::kAny ? "any" : "avg"; }

void Policy::validate() const {
  require(n >= 1, "policy n must be >= 1");
  require(tau >= -1.0 && tau <= 1.0, "policy threshold must lie in [-1, 1]");
}

double score(const Embedding& f, const Gallery& gallery, std::size_t user_index, ScoringRule rule,
             bool normalize_avg) {
  require(user_index < gallery.size(), "user index out of range");
  if (rule == ScoringRule::kAny) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& e : gallery.entries(user_index)) best = std::max(best, f.dot(e));
    return best;
  }
  const Eigen::VectorXd& m = gallery.mean(user_index);
  if (normalize_avg) {
    const double norm = m.norm();
    return norm > 0.0 ? f.dot(m) / norm : 0.0;
  }
  return f.dot(m);
}

double score(const Embedding& f, const Gallery& gallery, const std::string& user_id,
             ScoringRule rule, bool normalize_avg) {
  require(gallery.contains(user_id), "unknown user '" + user_id + "'");
  const auto& users = gallery.users();
  const auto idx = static_cast<std::size_t>(std::find(users.begin(), users.end(), user_id) - users.begin());
  return score(f, gallery, idx, rule, normalize_avg);
}

bool verify(const Embedding& f, const Gallery& gallery, std::size_t user_index,
            const Policy& policy) {
  policy.validate();
  return score(f, gallery, user_index, policy.rule, policy.normalize_avg) > policy.tau;
}

bool verify(const Embedding& f, const Gallery& gallery, const std::string& user_id,
            const Policy& policy) {
  policy.validate();
  return score(f, gallery, user_id, policy.rule, policy.normalize_avg) > policy.tau;
}

ScoreSet collect_scores(const Gallery& gallery, std::span<const Trial> trials, ScoringRule rule,
                        bool normalize_avg) {
  require(!trials.empty(), "no trials to score");
  ScoreSet out;
  for (const auto& t : trials) {
    const double s = score(t.probe, gallery, t.claimed_user, rule, normalize_avg);
    (t.genuine ? out.genuine : out.impostor).push_back(s);
  }
  return out;
}

std::vector<RocPoint> roc(const ScoreSet& scores) {
  require(!scores.genuine.empty(), "ROC needs genuine scores");
  require(!scores.impostor.empty(), "ROC needs impostor scores");
  std::vector<double> gen = scores.genuine, imp = scores.impostor;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> thresholds;
  thresholds.reserve(gen.size() + imp.size() + 1);
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.insert(thresholds.begin(),
                    std::nextafter(thresholds.front(), -std::numeric_limits<double>::infinity()));

  const double ng = static_cast<double>(gen.size());
  const double ni = static_cast<double>(imp.size());
  std::vector<RocPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto imp_above = imp.end() - std::upper_bound(imp.begin(), imp.end(), t);
    const auto gen_at_or_below = std::upper_bound(gen.begin(), gen.end(), t) - gen.begin();
    out.push_back({t, static_cast<double>(imp_above) / ni, static_cast<double>(gen_at_or_below) / ng});
  }
  return out;
}

double auc(std::span<const RocPoint> curve) {
  require(curve.size() >= 2, "AUC needs at least two ROC points");
  // Trapezoid over (FAR, TPR); thresholds ascend so FAR descends.
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double dx = curve[i - 1].far - curve[i].far;
    const double y0 = 1.0 - curve[i - 1].frr, y1 = 1.0 - curve[i].frr;
    area += 0.5 * dx * (y0 + y1);
  }
  // Rounding in the sum can leave the area a few ulps outside [0, 1].
  return std::clamp(area, 0.0, 1.0);
}

EerPoint eer(std::span<const RocPoint> curve) {
  require(!curve.empty(), "EER needs a non-empty ROC");
  std::size_t best = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double g = std::abs(curve[i].far - curve[i].frr);
    if (g < gap) {
      gap = g;
      best = i;
    }
  }
  return {0.5 * (curve[best].far + curve[best].frr), curve[best].threshold};
}

double threshold_at_far(std::span<const RocPoint> curve, double target_far) {
  require(!curve.empty(), "threshold calibration needs a non-empty ROC");
  require(target_far >= 0.0 && target_far <= 1.0, "target FAR must lie in [0, 1]");
  const bool resolvable = std::any_of(curve.begin(), curve.end(), [](const RocPoint& p) {
    return p.far > 0.0 && p.far < 1.0;
  });
  require(resolvable || target_far >= 1.0,
          "target FAR is unreachable: impostor scores take a single value");
  for (const auto& p : curve) {
    if (p.far <= target_far) return p.threshold;
  }
  throw_precondition("target FAR is unreachable");
}

std::vector<bool> matched_users(const Embedding& sample, const Gallery& gallery,
                                const Policy& policy) {
  std::vector<bool> out(gallery.size());
  for (std::size_t u = 0; u < gallery.size(); ++u) out[u] = verify(sample, gallery, u, policy);
  return out;
}

double impersonation_rate(std::span<const Embedding> samples, const Gallery& gallery,
                          const Policy& policy) {
  require(!samples.empty(), "impersonation rate needs at least one sample");
  require(!gallery.empty(), "impersonation rate needs a non-empty gallery");
  std::size_t covered = 0;
  for (std::size_t u = 0; u < gallery.size(); ++u) {
    for (const auto& w : samples) {
      if (verify(w, gallery, u, policy)) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(gallery.size());
}

std::vector<MenagerieRecord> menagerie(
    const Gallery& gallery, const std::map<std::string, std::vector<Embedding>>& probes_by_user) {
  std::vector<MenagerieRecord> out;
  for (std::size_t u = 0; u < gallery.size(); ++u) {
    const std::string& id = gallery.users()[u];
    auto it = probes_by_user.find(id);
    require(it != probes_by_user.end(), "no probes for user '" + id + "'");
    require(it->second.size() >= 2, "menagerie needs at least two probes for user '" + id + "'");
    double gen = 0.0, imp = 0.0;
    std::size_t ng = 0, ni = 0;
    for (const auto& p : it->second) {
      for (std::size_t v = 0; v < gallery.size(); ++v) {
        for (const auto& e : gallery.entries(v)) {
          if (v == u) {
            gen += p.dot(e);
            ++ng;
          } else {
            imp += p.dot(e);
            ++ni;
          }
        }
      }
    }
    out.push_back({id, gen / static_cast<double>(ng), ni ? imp / static_cast<double>(ni) : 0.0});
  }
  return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "spearman needs equal-length inputs");
  require(x.size() >= 3, "spearman needs at least three observations");
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, "spearman is undefined for a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace mvforge::verification
