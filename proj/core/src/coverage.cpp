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

#include "mvforge/coverage.hpp"

#include <algorithm>
#include <numeric>

#include "mvforge/errors.hpp"

namespace mvforge::coverage {
namespace {

std::size_t clamp_count(const ImpersonationMatrix& b, int c) {
  require(c >= 1, "number of attempts must be at least 1");
  return std::min(static_cast<std::size_t>(c), b.candidates());
}

std::vector<std::size_t> static_ranking(const ImpersonationMatrix& b) {
  std::vector<std::size_t> order(b.candidates());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> sums(b.candidates());
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] = b.row_sum(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sums[x] > sums[y]; });
  return order;
}

SelectionResult finish(const ImpersonationMatrix& b, std::vector<std::size_t> chosen) {
  SelectionResult r;
  r.per_attempt_coverage = cumulative_coverage(b, chosen);
  r.chosen = std::move(chosen);
  return r;
}

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace

ImpersonationMatrix::ImpersonationMatrix(std::vector<std::string> candidate_ids,
                                         std::vector<std::string> user_ids)
    : candidate_ids_(std::move(candidate_ids)),
      user_ids_(std::move(user_ids)),
      bits_(candidate_ids_.size() * user_ids_.size(), 0) {}

ImpersonationMatrix ImpersonationMatrix::from_rows(const std::vector<std::vector<int>>& rows) {
  const std::size_t m = rows.empty() ? 0 : rows.front().size();
  std::vector<std::string> cids, uids;
  for (std::size_t i = 0; i < rows.size(); ++i) cids.push_back("c" + std::to_string(i));
  for (std::size_t j = 0; j < m; ++j) uids.push_back("u" + std::to_string(j));
  ImpersonationMatrix b(std::move(cids), std::move(uids));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == m, "impersonation matrix rows must have equal length");
    for (std::size_t j = 0; j < m; ++j) {
      require(rows[i][j] == 0 || rows[i][j] == 1, "impersonation matrix entries must be 0 or 1");
      b.set(i, j, rows[i][j] == 1);
    }
  }
  return b;
}

void ImpersonationMatrix::set(std::size_t candidate, std::size_t user, bool match) {
  require(candidate < candidates() && user < users(), "impersonation matrix index out of range");
  bits_[candidate * user_ids_.size() + user] = match ? 1 : 0;
}

std::size_t ImpersonationMatrix::row_sum(std::size_t candidate) const {
  const auto row = bits_.begin() + static_cast<std::ptrdiff_t>(candidate * user_ids_.size());
  return static_cast<std::size_t>(
      std::count(row, row + static_cast<std::ptrdiff_t>(user_ids_.size()), 1));
}

ImpersonationMatrix ImpersonationMatrix::select_users(
    std::span<const std::size_t> user_indices) const {
  std::vector<std::string> uids;
  for (std::size_t u : user_indices) {
    require(u < users(), "user index out of range");
    uids.push_back(user_ids_[u]);
  }
  ImpersonationMatrix out(candidate_ids_, std::move(uids));
  for (std::size_t i = 0; i < candidates(); ++i) {
    for (std::size_t j = 0; j < user_indices.size(); ++j) out.set(i, j, at(i, user_indices[j]));
  }
  return out;
}

ImpersonationMatrix impersonation_matrix(std::span<const Embedding> candidates,
                                         std::vector<std::string> candidate_ids,
                                         const verification::Gallery& gallery,
                                         const verification::Policy& policy) {
  require(!candidates.empty(), "impersonation matrix needs at least one candidate");
  require(!gallery.empty(), "impersonation matrix needs a non-empty gallery");
  require(candidate_ids.size() == candidates.size(), "one id per candidate is required");
  ImpersonationMatrix b(std::move(candidate_ids), gallery.users());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::vector<bool> hits = verification::matched_users(candidates[i], gallery, policy);
    for (std::size_t u = 0; u < hits.size(); ++u) b.set(i, u, hits[u]);
  }
  return b;
}

ImpersonationMatrix impersonation_matrix(std::span<const Waveform> candidates,
                                         std::vector<std::string> candidate_ids,
                                         const encoder::EncoderHandle& encoder,
                                         const verification::Gallery& gallery,
                                         const verification::Policy& policy) {
  std::vector<Embedding> embeddings;
  embeddings.reserve(candidates.size());
  for (const Waveform& w : candidates) embeddings.push_back(encoder.embed(w));
  return impersonation_matrix(embeddings, std::move(candidate_ids), gallery, policy);
}

std::vector<double> cumulative_coverage(const ImpersonationMatrix& b,
                                        std::span<const std::size_t> chosen) {
  std::vector<std::uint8_t> covered(b.users(), 0);
  std::size_t count = 0;
  std::vector<double> out;
  out.reserve(chosen.size());
  for (std::size_t c : chosen) {
    require(c < b.candidates(), "candidate index out of range");
    for (std::size_t u = 0; u < b.users(); ++u) {
      if (!covered[u] && b.at(c, u)) {
        covered[u] = 1;
        ++count;
      }
    }
    out.push_back(b.users() == 0 ? 0.0
                                 : static_cast<double>(count) / static_cast<double>(b.users()));
  }
  return out;
}

SelectionResult select_independent(const ImpersonationMatrix& b, int c) {
  const std::size_t k = clamp_count(b, c);
  std::vector<std::size_t> order = static_ranking(b);
  order.resize(k);
  return finish(b, std::move(order));
}

SelectionResult select_complementary(const ImpersonationMatrix& b, int c) {
  const std::size_t k = clamp_count(b, c);
  std::vector<std::uint8_t> covered(b.users(), 0);
  std::vector<std::uint8_t> used(b.candidates(), 0);
  std::size_t uncovered = b.users();
  std::vector<std::size_t> chosen;
  while (chosen.size() < k && uncovered > 0) {
    std::size_t best = b.candidates();
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < b.candidates(); ++i) {
      if (used[i]) continue;
      std::size_t gain = 0;
      for (std::size_t u = 0; u < b.users(); ++u) gain += (!covered[u] && b.at(i, u)) ? 1 : 0;
      if (best == b.candidates() || gain > best_gain) {
        best = i;
        best_gain = gain;
      }
    }
    if (best_gain == 0) break;
    used[best] = 1;
    chosen.push_back(best);
    for (std::size_t u = 0; u < b.users(); ++u) {
      if (!covered[u] && b.at(best, u)) {
        covered[u] = 1;
        --uncovered;
      }
    }
  }
  for (std::size_t i : static_ranking(b)) {
    if (chosen.size() == k) break;
    if (!used[i]) {
      used[i] = 1;
      chosen.push_back(i);
    }
  }
  return finish(b, std::move(chosen));
}

SelectionResult select_random(const ImpersonationMatrix& b, int c, Rng& rng) {
  const std::size_t k = clamp_count(b, c);
  std::vector<std::size_t> order(b.candidates());
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates with an explicit uniform draw per slot.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(k);
  return finish(b, std::move(order));
}

SelectionResult brute_force_optimal(const ImpersonationMatrix& b, int c) {
  const std::size_t k = clamp_count(b, c);
  const std::size_t n = b.candidates();
  if (binomial(n, k) > 1e6) throw_precondition("brute-force search space exceeds 1e6 subsets");

  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::size_t> best = idx;
  std::size_t best_count = 0;
  bool first = true;
  std::vector<std::uint8_t> covered(b.users());
  while (true) {
    std::fill(covered.begin(), covered.end(), 0);
    std::size_t count = 0;
    for (std::size_t i : idx) {
      for (std::size_t u = 0; u < b.users(); ++u) {
        if (!covered[u] && b.at(i, u)) {
          covered[u] = 1;
          ++count;
        }
      }
    }
    if (first || count > best_count) {
      best = idx;
      best_count = count;
      first = false;
    }
    // Next combination in lexicographic order.
    std::size_t pos = k;
    while (pos > 0 && idx[pos - 1] == n - k + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return finish(b, std::move(best));
}

std::vector<double> evaluate_per_attempt(std::span<const Embedding> chosen,
                                         const verification::Gallery& gallery,
                                         const verification::Policy& policy) {
  require(!chosen.empty(), "selection evaluation needs at least one sample");
  require(!gallery.empty(), "selection evaluation needs a non-empty gallery");
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < chosen.size(); ++i) ids.push_back(std::to_string(i));
  const ImpersonationMatrix b = impersonation_matrix(chosen, std::move(ids), gallery, policy);
  std::vector<std::size_t> order(chosen.size());
  std::iota(order.begin(), order.end(), 0);
  return cumulative_coverage(b, order);
}

double evaluate_selection(std::span<const Embedding> chosen, const verification::Gallery& gallery,
                          const verification::Policy& policy) {
  return evaluate_per_attempt(chosen, gallery, policy).back();
}

}  // namespace mvforge::coverage
