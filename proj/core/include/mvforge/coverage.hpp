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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvforge/encoder.hpp"
#include "mvforge/rng.hpp"
#include "mvforge/verification.hpp"

namespace mvforge::coverage {

using encoder::Embedding;
using encoder::Waveform;

/// Binary candidates x users match matrix.
class ImpersonationMatrix {
 public:
  ImpersonationMatrix() = default;
  ImpersonationMatrix(std::vector<std::string> candidate_ids, std::vector<std::string> user_ids);
  /// Rows of 0/1 entries; ids default to "c<i>" and "u<j>".
  static ImpersonationMatrix from_rows(const std::vector<std::vector<int>>& rows);

  std::size_t candidates() const { return candidate_ids_.size(); }
  std::size_t users() const { return user_ids_.size(); }
  const std::vector<std::string>& candidate_ids() const { return candidate_ids_; }
  const std::vector<std::string>& user_ids() const { return user_ids_; }

  bool at(std::size_t candidate, std::size_t user) const {
    return bits_[candidate * user_ids_.size() + user] != 0;
  }
  void set(std::size_t candidate, std::size_t user, bool match);
  std::size_t row_sum(std::size_t candidate) const;

  /// Columns restricted to the given users, in the given order.
  ImpersonationMatrix select_users(std::span<const std::size_t> user_indices) const;

 private:
  std::vector<std::string> candidate_ids_;
  std::vector<std::string> user_ids_;
  std::vector<std::uint8_t> bits_;
};

ImpersonationMatrix impersonation_matrix(std::span<const Embedding> candidates,
                                         std::vector<std::string> candidate_ids,
                                         const verification::Gallery& gallery,
                                         const verification::Policy& policy);
ImpersonationMatrix impersonation_matrix(std::span<const Waveform> candidates,
                                         std::vector<std::string> candidate_ids,
                                         const encoder::EncoderHandle& encoder,
                                         const verification::Gallery& gallery,
                                         const verification::Policy& policy);

struct SelectionResult {
  std::vector<std::size_t> chosen;  // candidate indices in attempt order
  std::vector<double> per_attempt_coverage;

  double coverage() const {
    return per_attempt_coverage.empty() ? 0.0 : per_attempt_coverage.back();
  }
};

/// Fraction of users matched by at least one chosen row, after each attempt.
std::vector<double> cumulative_coverage(const ImpersonationMatrix& b,
                                        std::span<const std::size_t> chosen);

/// Static ranking by row sum, ties to the lower index.
SelectionResult select_independent(const ImpersonationMatrix& b, int c);
/// Greedy marginal coverage, ties to the lower index. Once every user is
/// covered the remaining slots follow the static ranking.
SelectionResult select_complementary(const ImpersonationMatrix& b, int c);
SelectionResult select_random(const ImpersonationMatrix& b, int c, Rng& rng);
/// Exhaustive search; the lexicographically first optimal subset, ascending.
/// Requires C(candidates, c) <= 1e6.
SelectionResult brute_force_optimal(const ImpersonationMatrix& b, int c);

/// Multi-attempt impersonation rate of the chosen samples on a gallery.
double evaluate_selection(std::span<const Embedding> chosen, const verification::Gallery& gallery,
                          const verification::Policy& policy);
/// Cumulative rate after each attempt; the last entry equals evaluate_selection.
std::vector<double> evaluate_per_attempt(std::span<const Embedding> chosen,
                                         const verification::Gallery& gallery,
                                         const verification::Policy& policy);

}  // namespace mvforge::coverage
