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

// Completion quality metrics and likelihood arithmetic. All string metrics
// work on Unicode code points, not bytes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "chunkshapley/errors.hpp"
#include "chunkshapley/game.hpp"
#include "chunkshapley/text.hpp"

namespace chunkshapley {

struct LikelihoodScore {
  std::vector<double> token_logprobs;

  std::size_t target_len() const { return token_logprobs.size(); }
};

inline std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(text::decode_utf8(a), text::decode_utf8(b));
}

// 100 * (1 - D / max(|pred|, |ref|)); two empty strings score 100.
inline double edit_similarity(std::string_view pred, std::string_view ref) {
  const std::u32string p = text::decode_utf8(pred);
  const std::u32string r = text::decode_utf8(ref);
  const std::size_t longest = std::max(p.size(), r.size());
  if (longest == 0) return 100.0;
  const double d = static_cast<double>(levenshtein(p, r));
  return 100.0 * (1.0 - d / static_cast<double>(longest));
}

// 1 iff equal after stripping surrounding whitespace, or byte-equal when
// `strict` is set.
inline int exact_match(std::string_view pred, std::string_view ref,
                       bool strict = false) {
  if (strict) return pred == ref ? 1 : 0;
  return text::strip(pred) == text::strip(ref) ? 1 : 0;
}

inline double normalized_loglik(const LikelihoodScore& score) {
  if (score.token_logprobs.empty()) {
    throw ContractViolation("normalized log-likelihood of an empty target");
  }
  double sum = 0.0;
  for (double lp : score.token_logprobs) {
    if (!std::isfinite(lp)) {
      throw BackendDataError("backend returned a non-finite token logprob");
    }
    sum += lp;
  }
  return sum / static_cast<double>(score.token_logprobs.size());
}

// Delta = with - base; vote is (sign(Delta), |Delta|) with sign(0) = 0.
inline Vote delta_effect(double ell_with, double ell_base) {
  if (!std::isfinite(ell_with) || !std::isfinite(ell_base)) {
    throw ContractViolation("delta_effect needs finite log-likelihoods");
  }
  const double delta = ell_with - ell_base;
  const int sign = delta > 0.0 ? 1 : (delta < 0.0 ? -1 : 0);
  return Vote{sign, std::fabs(delta)};
}

}  // namespace chunkshapley
