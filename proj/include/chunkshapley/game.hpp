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

// Cooperative games over retrieved chunks and exact Shapley attribution.
//
// Players are indexed 0..K-1 internally; every serialized form (CLI, JSONL)
// uses 1-based indices to match retrieval ranks.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chunkshapley/errors.hpp"

namespace chunkshapley {

// Hard guard for 2^K enumeration.
inline constexpr int kMaxSubsetPlayers = 20;
// Hard guard for K! enumeration in the permutation oracle.
inline constexpr int kMaxPermutationPlayers = 8;

// Signed single-chunk effect: sign in {-1, 0, +1} and magnitude >= 0.
struct Vote {
  int y = 0;
  double omega = 0.0;

  friend bool operator==(const Vote&, const Vote&) = default;
};

inline void validate_vote(const Vote& v) {
  if (v.y < -1 || v.y > 1) {
    throw ContractViolation("vote sign must be -1, 0 or +1, got " +
                            std::to_string(v.y));
  }
  if (!(v.omega >= 0.0) || !std::isfinite(v.omega)) {
    throw ContractViolation("vote weight must be finite and non-negative");
  }
}

// A subset of players as a fixed-width bitmask; bit i set <=> player i in S.
class Coalition {
 public:
  constexpr Coalition() = default;
  constexpr explicit Coalition(std::uint32_t mask) : mask_(mask) {}

  static Coalition from_indices(std::span<const int> players) {
    std::uint32_t mask = 0;
    for (int p : players) {
      if (p < 0 || p >= 32) {
        throw ContractViolation("coalition member out of range: " +
                                std::to_string(p));
      }
      mask |= (1u << p);
    }
    return Coalition(mask);
  }
  static Coalition from_indices(std::initializer_list<int> players) {
    return from_indices(std::span<const int>(players.begin(), players.size()));
  }
  static constexpr Coalition full(int k) {
    return Coalition(k >= 32 ? ~0u : ((1u << k) - 1u));
  }

  constexpr std::uint32_t mask() const { return mask_; }
  constexpr bool contains(int player) const {
    return ((mask_ >> player) & 1u) != 0;
  }
  constexpr int size() const { return std::popcount(mask_); }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr Coalition with(int player) const {
    return Coalition(mask_ | (1u << player));
  }
  // True iff every member is < k.
  constexpr bool fits(int k) const {
    return k >= 32 || (mask_ >> k) == 0;
  }

  // Members in ascending index order.
  std::vector<int> members() const {
    std::vector<int> out;
    for (std::uint32_t m = mask_; m != 0; m &= m - 1) {
      out.push_back(std::countr_zero(m));
    }
    return out;
  }

  friend constexpr bool operator==(Coalition, Coalition) = default;
  friend constexpr auto operator<=>(Coalition, Coalition) = default;

 private:
  std::uint32_t mask_ = 0;
};

// sigma(x) - sigma(0), written through tanh so that small arguments keep
// full relative precision.
inline double centered_logistic(double x) { return 0.5 * std::tanh(0.5 * x); }

inline double logistic(double x) { return 0.5 + centered_logistic(x); }

class SurrogateGame {
 public:
  SurrogateGame(double beta, std::vector<Vote> votes)
      : beta_(beta), votes_(std::move(votes)) {
    if (!(beta_ > 0.0) || !std::isfinite(beta_)) {
      throw ContractViolation("surrogate beta must be finite and > 0");
    }
    if (votes_.empty()) {
      throw ContractViolation("surrogate game needs at least one player");
    }
    if (static_cast<int>(votes_.size()) > kMaxSubsetPlayers) {
      throw SizingError("surrogate game has " + std::to_string(votes_.size()) +
                        " players; exact enumeration is capped at " +
                        std::to_string(kMaxSubsetPlayers));
    }
    for (const Vote& v : votes_) validate_vote(v);
  }

  double beta() const { return beta_; }
  const std::vector<Vote>& votes() const { return votes_; }
  int size() const { return static_cast<int>(votes_.size()); }

 private:
  double beta_;
  std::vector<Vote> votes_;
};

inline void check_coalition(Coalition s, int k) {
  if (!s.fits(k)) {
    throw ContractViolation("coalition references a player outside 1.." +
                            std::to_string(k));
  }
}

// g(S) = sum_{i in S} omega_i * y_i
inline double vote_sum(const SurrogateGame& game, Coalition s) {
  check_coalition(s, game.size());
  double g = 0.0;
  for (int i : s.members()) {
    const Vote& v = game.votes()[i];
    g += v.omega * v.y;
  }
  return g;
}

// v_sur(S) = sigma(beta * g(S)) - sigma(0)
inline double surrogate_value(const SurrogateGame& game, Coalition s) {
  return centered_logistic(game.beta() * vote_sum(game, s));
}

// Explicit utility for every one of the 2^K coalitions, indexed by mask.
class TabulatedGame {
 public:
  // `values` must hold exactly 2^k entries with values[0] == 0.
  TabulatedGame(int k, std::vector<double> values)
      : k_(k), values_(std::move(values)) {
    if (k_ < 1) throw ContractViolation("tabulated game needs k >= 1");
    if (k_ > kMaxSubsetPlayers) {
      throw SizingError("tabulated game has " + std::to_string(k_) +
                        " players; exact enumeration is capped at " +
                        std::to_string(kMaxSubsetPlayers));
    }
    const std::size_t expected = std::size_t{1} << k_;
    if (values_.size() != expected) {
      throw ContractViolation("tabulated game with k=" + std::to_string(k_) +
                              " needs " + std::to_string(expected) +
                              " coalition values, got " +
                              std::to_string(values_.size()));
    }
    if (values_[0] != 0.0) {
      throw ContractViolation("tabulated game must satisfy v(empty) = 0");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) {
        throw ContractViolation("tabulated game values must be finite");
      }
    }
  }

  // Builds from sparse (coalition, value) entries; every coalition must
  // appear exactly once.
  static TabulatedGame from_entries(
      int k, std::span<const std::pair<Coalition, double>> entries) {
    if (k < 1 || k > kMaxSubsetPlayers) {
      throw SizingError("tabulated game size out of range: " +
                        std::to_string(k));
    }
    const std::size_t n = std::size_t{1} << k;
    std::vector<double> values(n, 0.0);
    std::vector<bool> seen(n, false);
    for (const auto& [s, v] : entries) {
      check_coalition(s, k);
      if (seen[s.mask()]) {
        throw ContractViolation("duplicate coalition entry in tabulated game");
      }
      seen[s.mask()] = true;
      values[s.mask()] = v;
    }
    for (std::size_t m = 0; m < n; ++m) {
      if (!seen[m]) {
        throw ContractViolation("tabulated game is missing coalition mask " +
                                std::to_string(m));
      }
    }
    return TabulatedGame(k, std::move(values));
  }

  int size() const { return k_; }
  double value(Coalition s) const {
    check_coalition(s, k_);
    return values_[s.mask()];
  }
  std::span<const double> values() const { return values_; }

 private:
  int k_;
  std::vector<double> values_;
};

struct ShapleyAttribution {
  std::vector<double> phi;
  // sum(phi) - v(full coalition)
  double efficiency_residual = 0.0;
};

namespace detail {

// w(s) = s! (k-s-1)! / k! = 1 / (k * C(k-1, s)), s = 0..k-1.
inline std::vector<double> shapley_weights(int k) {
  std::vector<double> w(static_cast<std::size_t>(k));
  std::uint64_t binom = 1;  // C(k-1, s), exact for k <= 20
  for (int s = 0; s < k; ++s) {
    w[s] = 1.0 / (static_cast<double>(k) * static_cast<double>(binom));
    binom = binom * static_cast<std::uint64_t>(k - 1 - s) /
            static_cast<std::uint64_t>(s + 1);
  }
  return w;
}

// Subset-form Shapley over a full table of 2^k utilities.
inline ShapleyAttribution shapley_from_table(int k,
                                             std::span<const double> v) {
  const std::vector<double> w = shapley_weights(k);
  const std::uint32_t n = 1u << k;
  ShapleyAttribution out;
  out.phi.assign(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i) {
    const std::uint32_t bit = 1u << i;
    double acc = 0.0;
    for (std::uint32_t m = 0; m < n; ++m) {
      if ((m & bit) != 0) continue;
      acc += w[std::popcount(m)] * (v[m | bit] - v[m]);
    }
    out.phi[i] = acc;
  }
  double total = 0.0;
  for (double p : out.phi) total += p;
  out.efficiency_residual = total - v[n - 1];
  return out;
}

}  // namespace detail

// Utility of every coalition of the surrogate game, indexed by mask.
inline std::vector<double> tabulate_surrogate(const SurrogateGame& game) {
  const int k = game.size();
  const std::uint32_t n = 1u << k;
  std::vector<double> g(n, 0.0);
  std::vector<double> v(n, 0.0);
  for (std::uint32_t m = 1; m < n; ++m) {
    const int low = std::countr_zero(m);
    const Vote& vote = game.votes()[low];
    g[m] = g[m & (m - 1)] + vote.omega * vote.y;
    v[m] = centered_logistic(game.beta() * g[m]);
  }
  return v;
}

// Exact Shapley values under the surrogate utility. O(K 2^K) time and
// O(2^K) memory.
inline ShapleyAttribution exact_shapley_surrogate(const SurrogateGame& game) {
  const std::vector<double> v = tabulate_surrogate(game);
  return detail::shapley_from_table(game.size(), v);
}

inline ShapleyAttribution exact_shapley_tabulated(const TabulatedGame& tab) {
  return detail::shapley_from_table(tab.size(), tab.values());
}

// Averages marginal contributions over all K! player orderings. Kept
// deliberately separate from the subset form so the two can cross-check.
inline ShapleyAttribution permutation_shapley_oracle(const TabulatedGame& tab) {
  const int k = tab.size();
  if (k > kMaxPermutationPlayers) {
    throw SizingError("permutation oracle is capped at " +
                      std::to_string(kMaxPermutationPlayers) +
                      " players, got " + std::to_string(k));
  }
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
  std::uint64_t count = 0;
  const std::span<const double> v = tab.values();
  do {
    std::uint32_t pred = 0;
    for (int player : order) {
      const std::uint32_t next = pred | (1u << player);
      sums[player] += v[next] - v[pred];
      pred = next;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));

  ShapleyAttribution out;
  out.phi.resize(sums.size());
  double total = 0.0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    out.phi[i] = sums[i] / static_cast<double>(count);
    total += out.phi[i];
  }
  out.efficiency_residual = total - v[(1u << k) - 1];
  return out;
}

// Indices sorted by value, descending; ties keep ascending index order.
inline std::vector<int> rank_descending(std::span<const double> values) {
  for (double x : values) {
    if (std::isnan(x)) throw ContractViolation("cannot rank NaN values");
  }
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return values[a] > values[b]; });
  return idx;
}

}  // namespace chunkshapley
