/*
 * Copyright 2026 The ChunkShapley Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "chunkshapley/game.hpp"
#include "support/oracles.hpp"

namespace cs = chunkshapley;

namespace {

double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }

cs::SurrogateGame random_game(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> beta(0.1, 5.0), omega(0.0, 3.0);
  std::uniform_int_distribution<int> y(-1, 1);
  std::vector<cs::Vote> votes;
  for (int i = 0; i < k; ++i) votes.push_back({y(rng), omega(rng)});
  return cs::SurrogateGame(beta(rng), votes);
}

std::vector<double> random_table(std::mt19937_64& rng, int k) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(std::size_t{1} << k);
  for (auto& x : v) x = n(rng);
  v[0] = 0.0;
  return v;
}

}  // namespace

TEST(Coalition, BitmaskOperations) {
  const cs::Coalition s = cs::Coalition::from_indices({0, 2});
  EXPECT_EQ(s.mask(), 5u);
  EXPECT_TRUE(s.contains(2));
  EXPECT_FALSE(s.contains(1));
  EXPECT_EQ(s.size(), 2);
  EXPECT_EQ(s.members(), (std::vector<int>{0, 2}));
  EXPECT_EQ(s.with(1), cs::Coalition::full(3));
  EXPECT_TRUE(s.fits(3));
  EXPECT_FALSE(s.fits(2));
  EXPECT_THROW(cs::Coalition::from_indices({-1}), cs::ContractViolation);
}

TEST(VoteSum, SpecExamples) {
  const cs::SurrogateGame g(1.0, {{+1, 1.0}, {-1, 1.0}});
  EXPECT_DOUBLE_EQ(cs::vote_sum(g, cs::Coalition::from_indices({0})), 1.0);
  EXPECT_DOUBLE_EQ(cs::vote_sum(g, cs::Coalition{}), 0.0);
  const cs::SurrogateGame h(2.0, {{+1, 0.5}, {+1, 0.5}, {-1, 2.0}});
  EXPECT_DOUBLE_EQ(cs::vote_sum(h, cs::Coalition::full(3)), -1.0);
}

TEST(SurrogateValue, ClosedForm) {
  const cs::SurrogateGame g(1.0, {{+1, 1.0}, {-1, 1.0}});
  EXPECT_EQ(cs::surrogate_value(g, cs::Coalition{}), 0.0);
  EXPECT_NEAR(cs::surrogate_value(g, cs::Coalition::from_indices({0})), 0.2310585786, 1e-10);
  EXPECT_NEAR(cs::surrogate_value(g, cs::Coalition::from_indices({1})), -0.2310585786, 1e-10);
  EXPECT_NEAR(cs::surrogate_value(g, cs::Coalition::from_indices({0})), sigma(1.0) - 0.5, 1e-15);
}

TEST(SurrogateValue, RejectsForeignCoalition) {
  const cs::SurrogateGame g(1.0, {{+1, 1.0}});
  EXPECT_THROW(cs::surrogate_value(g, cs::Coalition::from_indices({1})), cs::ContractViolation);
}

TEST(SurrogateGame, Validation) {
  EXPECT_THROW(cs::SurrogateGame(0.0, {{1, 1.0}}), cs::ContractViolation);
  EXPECT_THROW(cs::SurrogateGame(1.0, {}), cs::ContractViolation);
  EXPECT_THROW(cs::SurrogateGame(1.0, {{2, 1.0}}), cs::ContractViolation);
  EXPECT_THROW(cs::SurrogateGame(1.0, {{1, -0.5}}), cs::ContractViolation);
  EXPECT_THROW(cs::SurrogateGame(1.0, std::vector<cs::Vote>(21, {1, 1.0})), cs::SizingError);
  EXPECT_NO_THROW(cs::SurrogateGame(1.0, std::vector<cs::Vote>(20, {1, 1.0})));
}

TEST(ExactShapleySurrogate, SinglePlayerGetsEverything) {
  const auto a = cs::exact_shapley_surrogate(cs::SurrogateGame(1.0, {{+1, 0.7}}));
  ASSERT_EQ(a.phi.size(), 1u);
  EXPECT_NEAR(a.phi[0], 0.1681878, 1e-7);
  EXPECT_NEAR(a.phi[0], sigma(0.7) - 0.5, 1e-15);
}

TEST(ExactShapleySurrogate, OpposedPair) {
  const auto a = cs::exact_shapley_surrogate(cs::SurrogateGame(1.0, {{+1, 1.0}, {-1, 1.0}}));
  EXPECT_NEAR(a.phi[0], 0.2310586, 1e-7);
  EXPECT_NEAR(a.phi[1], -0.2310586, 1e-7);
  EXPECT_NEAR(a.phi[0] + a.phi[1], 0.0, 1e-15);
  EXPECT_NEAR(a.efficiency_residual, 0.0, 1e-15);
}

TEST(ExactShapleySurrogate, AllZeroVotesGiveZero) {
  const auto a = cs::exact_shapley_surrogate(
      cs::SurrogateGame(1.0, {{0, 0.0}, {0, 0.0}, {0, 0.0}}));
  for (double p : a.phi) EXPECT_EQ(p, 0.0);
}

TEST(ExactShapleySurrogate, MatchesFactorialFormula) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + trial % 9;
    const cs::SurrogateGame g = random_game(rng, k);
    const auto a = cs::exact_shapley_surrogate(g);
    const auto ref = oracle::shapley(k, [&](std::uint32_t m) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) {
        if (m & (1u << i)) s += g.votes()[i].omega * g.votes()[i].y;
      }
      return sigma(g.beta() * s) - 0.5;
    });
    for (int i = 0; i < k; ++i) EXPECT_NEAR(a.phi[i], ref[i], 1e-9);
  }
}

TEST(ExactShapleySurrogate, Axioms) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + trial % 10;
    std::vector<cs::Vote> votes;
    std::uniform_real_distribution<double> omega(0.01, 3.0);
    for (int i = 0; i < k; ++i) votes.push_back({(i % 2) ? 1 : -1, omega(rng)});
    votes[0] = {1, 0.0};  // dummy
    if (k >= 3) votes[2] = votes[1];  // symmetric pair
    const cs::SurrogateGame g(0.5 + trial % 4, votes);
    const auto a = cs::exact_shapley_surrogate(g);
    EXPECT_EQ(a.phi[0], 0.0);
    if (k >= 3) {
      EXPECT_NEAR(a.phi[1], a.phi[2], 1e-12);
    }
    for (int i = 1; i < k; ++i) EXPECT_EQ(a.phi[i] > 0 ? 1 : -1, votes[i].y);
    EXPECT_LE(std::abs(a.efficiency_residual), 1e-9);
  }
}

TEST(ExactShapleySurrogate, ScaleIdentity) {
  const cs::SurrogateGame a(1.0, {{1, 0.8}, {-1, 0.4}, {1, 1.2}});
  const cs::SurrogateGame b(2.0, {{1, 0.4}, {-1, 0.2}, {1, 0.6}});
  const auto ta = cs::tabulate_surrogate(a);
  const auto tb = cs::tabulate_surrogate(b);
  for (std::size_t m = 0; m < ta.size(); ++m) EXPECT_NEAR(ta[m], tb[m], 1e-15);
}

TEST(ShapleyWeights, SumToOneOverSubsetSizes) {
  for (int k = 1; k <= 20; ++k) {
    const auto w = cs::detail::shapley_weights(k);
    // Each size s appears C(k-1, s) times; the weighted counts sum to 1/k * k = 1.
    long double total = 0.0L;
    long double binom = 1.0L;
    for (int s = 0; s < k; ++s) {
      total += binom * w[s];
      binom = binom * (k - 1 - s) / (s + 1);
    }
    EXPECT_NEAR(static_cast<double>(total), 1.0, 1e-12) << "k=" << k;
  }
}

TEST(TabulatedGame, Validation) {
  EXPECT_THROW(cs::TabulatedGame(2, {0.0, 1.0}), cs::ContractViolation);
  EXPECT_THROW(cs::TabulatedGame(1, {0.5, 1.0}), cs::ContractViolation);
  EXPECT_THROW(cs::TabulatedGame(1, {0.0, NAN}), cs::ContractViolation);
  EXPECT_NO_THROW(cs::TabulatedGame(1, {0.0, 1.0}));
}

TEST(TabulatedGame, FromEntriesRequiresEveryCoalition) {
  using E = std::pair<cs::Coalition, double>;
  const std::vector<E> missing = {{cs::Coalition{}, 0.0}};
  EXPECT_THROW(cs::TabulatedGame::from_entries(1, missing), cs::ContractViolation);
  const std::vector<E> full = {{cs::Coalition(1u), 2.0}, {cs::Coalition{}, 0.0}};
  EXPECT_EQ(cs::TabulatedGame::from_entries(1, full).value(cs::Coalition(1u)), 2.0);
  const std::vector<E> dup = {{cs::Coalition{}, 0.0}, {cs::Coalition{}, 0.0},
                              {cs::Coalition(1u), 1.0}};
  EXPECT_THROW(cs::TabulatedGame::from_entries(1, dup), cs::ContractViolation);
}

TEST(ExactShapleyTabulated, AdditiveGame) {
  const cs::TabulatedGame t(2, {0.0, 0.2, -0.1, 0.1});
  const auto a = cs::exact_shapley_tabulated(t);
  EXPECT_NEAR(a.phi[0], 0.2, 1e-15);
  EXPECT_NEAR(a.phi[1], -0.1, 1e-15);
}

TEST(ExactShapleyTabulated, DictatorGame) {
  std::vector<double> v(8);
  for (std::uint32_t m = 0; m < 8; ++m) v[m] = (m & 1u) ? 1.0 : 0.0;
  const auto a = cs::exact_shapley_tabulated(cs::TabulatedGame(3, v));
  EXPECT_EQ(a.phi, (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(PermutationOracle, SingletonAndSymmetry) {
  EXPECT_EQ(cs::permutation_shapley_oracle(cs::TabulatedGame(1, {0.0, 0.7})).phi[0], 0.7);
  const auto a = cs::permutation_shapley_oracle(cs::TabulatedGame(2, {0.0, 0.3, 0.3, 1.0}));
  EXPECT_DOUBLE_EQ(a.phi[0], 0.5);
  EXPECT_DOUBLE_EQ(a.phi[1], 0.5);
}

TEST(PermutationOracle, AgreesWithSubsetForm) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 1 + trial % 8;
    const cs::TabulatedGame t(k, random_table(rng, k));
    const auto a = cs::exact_shapley_tabulated(t);
    const auto b = cs::permutation_shapley_oracle(t);
    for (int i = 0; i < k; ++i) EXPECT_NEAR(a.phi[i], b.phi[i], 1e-9);
  }
}

TEST(PermutationOracle, RefusesLargeGames) {
  EXPECT_THROW(cs::permutation_shapley_oracle(cs::TabulatedGame(9, std::vector<double>(512))),
               cs::SizingError);
}

TEST(RankDescending, SpecExamples) {
  EXPECT_EQ(cs::rank_descending(std::vector<double>{0.3, 0.9, 0.3}),
            (std::vector<int>{1, 0, 2}));
  EXPECT_EQ(cs::rank_descending(std::vector<double>{0, 0, 0}), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(cs::rank_descending(std::vector<double>{5.0}), (std::vector<int>{0}));
  EXPECT_THROW(cs::rank_descending(std::vector<double>{1.0, NAN}), cs::ContractViolation);
}

TEST(RankDescending, SurrogateRankFollowsSignedVotes) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + trial % 8;
    const cs::SurrogateGame g = random_game(rng, k);
    const auto phi = cs::exact_shapley_surrogate(g).phi;
    std::vector<double> signed_votes;
    for (const auto& v : g.votes()) signed_votes.push_back(v.y * v.omega);
    const auto r1 = cs::rank_descending(phi);
    for (std::size_t i = 1; i < r1.size(); ++i) {
      EXPECT_GE(signed_votes[r1[i - 1]] + 1e-12, signed_votes[r1[i]]);
    }
  }
}
