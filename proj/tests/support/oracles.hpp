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

// Independent reference implementations. None of these call into the
// library code they are used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// Strict decoder for the well-formed UTF-8 the fuzzers generate.
inline std::vector<std::uint32_t> code_points(const std::string& s) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto b = static_cast<unsigned char>(s[i]);
    int len = b < 0x80 ? 1 : b < 0xE0 ? 2 : b < 0xF0 ? 3 : 4;
    std::uint32_t cp = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
    for (int j = 1; j < len; ++j) cp = (cp << 6) | (static_cast<unsigned char>(s[i + j]) & 0x3F);
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

// Full (n+1) x (m+1) Wagner-Fischer table.
inline std::size_t levenshtein(const std::string& a8, const std::string& b8) {
  const auto a = code_points(a8);
  const auto b = code_points(b8);
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return d[a.size()][b.size()];
}

inline double edit_similarity(const std::string& p, const std::string& r) {
  const std::size_t n = std::max(code_points(p).size(), code_points(r).size());
  if (n == 0) return 100.0;
  return 100.0 * (1.0 - static_cast<double>(levenshtein(p, r)) / static_cast<double>(n));
}

inline std::string trim(const std::string& s) {
  const char* ws = " \t\n\r\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline int exact_match(const std::string& p, const std::string& r) {
  return trim(p) == trim(r) ? 1 : 0;
}

// Direct subset formula with factorial weights in long double.
inline std::vector<double> shapley(int k, const std::function<double(std::uint32_t)>& v) {
  std::vector<long double> fact(static_cast<std::size_t>(k) + 1, 1.0L);
  for (int i = 1; i <= k; ++i) fact[i] = fact[i - 1] * i;
  std::vector<double> phi(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i) {
    long double acc = 0.0L;
    for (std::uint32_t s = 0; s < (1u << k); ++s) {
      if (s & (1u << i)) continue;
      const int size = __builtin_popcount(s);
      const long double w = fact[size] * fact[k - size - 1] / fact[k];
      acc += w * (static_cast<long double>(v(s | (1u << i))) - static_cast<long double>(v(s)));
    }
    phi[i] = static_cast<double>(acc);
  }
  return phi;
}

// Expected pool as a set of member sets (0-based), built by set algebra.
inline std::set<std::set<int>> pool_sets(const std::vector<int>& phi_rank,
                                         const std::vector<int>& delta_rank, int n_v,
                                         int n_delta, int top_l) {
  std::set<std::set<int>> out{{}};
  for (int n = 1; n <= n_v; ++n) out.insert(std::set<int>(phi_rank.begin(), phi_rank.begin() + n));
  for (int n = 1; n <= n_delta; ++n) {
    out.insert(std::set<int>(delta_rank.begin(), delta_rank.begin() + n));
  }
  const std::set<int> top(delta_rank.begin(), delta_rank.begin() + top_l);
  // Power set of the top-L, restricted to sizes 2 and 3.
  const std::vector<int> t(top.begin(), top.end());
  for (std::uint32_t m = 0; m < (1u << t.size()); ++m) {
    const int size = __builtin_popcount(m);
    if (size != 2 && size != 3) continue;
    std::set<int> s;
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (m & (1u << j)) s.insert(t[j]);
    }
    out.insert(s);
  }
  return out;
}

inline std::vector<int> random_permutation(int k, std::mt19937_64& rng) {
  std::vector<int> p(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) p[i] = i;
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// Random string over a small alphabet that includes multi-byte characters.
inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static const std::vector<std::string> alphabet = {"a", "b", "c", " ", "\n", "x",
                                                     "\xC3\xA9", "\xE2\x88\x91",
                                                     "\xF0\x9F\x99\x82"};
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[pick(rng)];
  return s;
}

}  // namespace oracle
