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

#include <algorithm>
#include <random>
#include <set>

#include "mvforge/coverage.hpp"
#include "mvforge/errors.hpp"

namespace mvforge::coverage {
namespace {

ImpersonationMatrix random_matrix(std::size_t rows, std::size_t cols, double p, Rng& rng) {
  std::bernoulli_distribution bit(p);
  std::vector<std::vector<int>> r(rows, std::vector<int>(cols));
  for (auto& row : r) {
    for (auto& v : row) v = bit(rng);
  }
  return ImpersonationMatrix::from_rows(r);
}

// Coverage of a subset counted directly from the matrix.
double direct_coverage(const ImpersonationMatrix& b, const std::vector<std::size_t>& chosen) {
  std::size_t hit = 0;
  for (std::size_t u = 0; u < b.users(); ++u) {
    hit += std::any_of(chosen.begin(), chosen.end(), [&](std::size_t c) { return b.at(c, u); });
  }
  return static_cast<double>(hit) / static_cast<double>(b.users());
}

TEST(Matrix, FromRowsAndAccessors) {
  const auto b = ImpersonationMatrix::from_rows({{1, 0, 1}, {0, 0, 0}});
  EXPECT_EQ(b.candidates(), 2u);
  EXPECT_EQ(b.users(), 3u);
  EXPECT_EQ(b.candidate_ids(), (std::vector<std::string>{"c0", "c1"}));
  EXPECT_EQ(b.user_ids(), (std::vector<std::string>{"u0", "u1", "u2"}));
  EXPECT_EQ(b.row_sum(0), 2u);
  EXPECT_EQ(b.row_sum(1), 0u);
  const std::vector<std::size_t> cols{2, 1};
  const auto s = b.select_users(cols);
  EXPECT_EQ(s.user_ids(), (std::vector<std::string>{"u2", "u1"}));
  EXPECT_TRUE(s.at(0, 0));
  EXPECT_FALSE(s.at(0, 1));
  EXPECT_THROW(ImpersonationMatrix::from_rows({{1, 0}, {1}}), Error);
  EXPECT_THROW(ImpersonationMatrix::from_rows({{2}}), Error);
}

TEST(Matrix, FromEmbeddingsMatchesVerify) {
  verification::Gallery g(1);
  Eigen::VectorXd a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  g.enroll("a", {a});
  g.enroll("b", {b});
  const std::vector<Embedding> cands{a, b, Eigen::Vector2d(1, 1).normalized()};
  const auto m =
      impersonation_matrix(cands, {"x", "y", "z"}, g, {verification::ScoringRule::kAny, 1, 0.5});
  EXPECT_EQ(m.candidate_ids(), (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_EQ(m.user_ids(), g.users());
  EXPECT_TRUE(m.at(0, 0) && !m.at(0, 1));
  EXPECT_TRUE(!m.at(1, 0) && m.at(1, 1));
  EXPECT_TRUE(m.at(2, 0) && m.at(2, 1));
  EXPECT_THROW(impersonation_matrix(cands, {"x"}, g, {}), Error);
}

TEST(Selection, WorkedExample) {
  const auto b = ImpersonationMatrix::from_rows({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}});
  const auto comp = select_complementary(b, 2);
  const auto ind = select_independent(b, 2);
  EXPECT_EQ(comp.chosen, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(ind.chosen, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(comp.coverage(), 1.0);
  EXPECT_DOUBLE_EQ(ind.coverage(), 2.0 / 3.0);
  EXPECT_EQ(comp.per_attempt_coverage.size(), 2u);
}

TEST(Selection, PaddingAfterFullCoverage) {
  const auto b = ImpersonationMatrix::from_rows({{1, 1}, {0, 0}, {1, 0}, {0, 1}});
  const auto comp = select_complementary(b, 3);
  EXPECT_EQ(comp.chosen, (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_EQ(comp.per_attempt_coverage, (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_EQ(select_complementary(b, 10).chosen.size(), 4u);
  EXPECT_THROW(select_complementary(b, 0), Error);
}

TEST(Selection, CurvesAreNonDecreasingAndConsistent) {
  Rng rng = make_rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = random_matrix(12, 15, 0.3, rng);
    for (const auto& r : {select_independent(b, 5), select_complementary(b, 5), select_random(b, 5, rng)}) {
      ASSERT_EQ(r.chosen.size(), 5u);
      EXPECT_EQ(std::set<std::size_t>(r.chosen.begin(), r.chosen.end()).size(), 5u);
      EXPECT_TRUE(std::is_sorted(r.per_attempt_coverage.begin(), r.per_attempt_coverage.end()));
      EXPECT_EQ(r.per_attempt_coverage, cumulative_coverage(b, r.chosen));
      EXPECT_DOUBLE_EQ(r.coverage(), direct_coverage(b, r.chosen));
    }
    EXPECT_GE(select_complementary(b, 5).coverage(), select_independent(b, 1).coverage());
  }
}

TEST(Selection, GreedyBoundAgainstBruteForce) {
  Rng rng = make_rng(22);
  constexpr double kBound = 1.0 - 0.36787944117144233;
  for (int trial = 0; trial < 30; ++trial) {
    const auto b = random_matrix(10, 12, 0.25, rng);
    const auto best = brute_force_optimal(b, 3);
    EXPECT_TRUE(std::is_sorted(best.chosen.begin(), best.chosen.end()));
    EXPECT_DOUBLE_EQ(best.coverage(), direct_coverage(b, best.chosen));
    EXPECT_GE(select_complementary(b, 3).coverage(), kBound * best.coverage() - 1e-12);
    EXPECT_GE(best.coverage(), select_complementary(b, 3).coverage());
  }
}

TEST(Selection, BruteForceLimit) {
  Rng rng = make_rng(23);
  const auto b = random_matrix(60, 4, 0.5, rng);
  EXPECT_THROW(brute_force_optimal(b, 10), Error);
}

TEST(Selection, RandomIsSeeded) {
  Rng rng = make_rng(24);
  const auto b = random_matrix(20, 5, 0.3, rng);
  Rng r1 = make_rng(5), r2 = make_rng(5);
  EXPECT_EQ(select_random(b, 6, r1).chosen, select_random(b, 6, r2).chosen);
}

TEST(Evaluate, PerAttemptEndsAtTotal) {
  verification::Gallery g(1);
  std::vector<Embedding> basis;
  for (int i = 0; i < 3; ++i) {
    Embedding e = Embedding::Zero(3);
    e[i] = 1.0;
    basis.push_back(e);
    g.enroll("u" + std::to_string(i), {e});
  }
  const verification::Policy p{verification::ScoringRule::kAny, 1, 0.5};
  const std::vector<Embedding> chosen{basis[2], basis[2], basis[0]};
  const auto curve = evaluate_per_attempt(chosen, g, p);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_DOUBLE_EQ(curve[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(curve[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(curve[2], 2.0 / 3.0);
  EXPECT_EQ(curve.back(), evaluate_selection(chosen, g, p));
  EXPECT_THROW(evaluate_selection({}, g, p), Error);
}

}  // namespace
}  // namespace mvforge::coverage
