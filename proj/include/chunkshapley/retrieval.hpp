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

// Sliding-window chunking of cross-file code and sparse Jaccard retrieval.

#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "chunkshapley/errors.hpp"
#include "chunkshapley/text.hpp"

namespace chunkshapley {

using TokenSet = std::unordered_set<std::string>;

// Identifier-ish tokens: maximal runs of ASCII alphanumerics, '_' and any
// non-ASCII byte. Case preserved, duplicates collapsed.
inline TokenSet tokenize(std::string_view s) {
  TokenSet out;
  std::size_t i = 0;
  auto is_word = [](unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
           (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
  };
  while (i < s.size()) {
    while (i < s.size() && !is_word(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && is_word(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.emplace(s.substr(start, i - start));
  }
  return out;
}

// |a & b| / |a | b|; two empty sets give 0.
inline double jaccard(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 0.0;
  const TokenSet& small = a.size() <= b.size() ? a : b;
  const TokenSet& large = a.size() <= b.size() ? b : a;
  std::size_t inter = 0;
  for (const auto& t : small) inter += large.count(t);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct Chunk {
  std::string source_path;
  int start_line = 0;  // 1-based, inclusive
  int end_line = 0;    // 1-based, inclusive
  std::string text;
  TokenSet token_set;
  int retrieval_rank = 0;  // 1-based once retrieved, 0 before

  static Chunk make(std::string path, int start, int end, std::string body) {
    Chunk c;
    c.source_path = std::move(path);
    c.start_line = start;
    c.end_line = end;
    c.text = std::move(body);
    c.token_set = tokenize(c.text);
    return c;
  }
};

struct ChunkingParams {
  int window = 20;  // lines per chunk
  int stride = 10;  // lines between chunk starts
};

inline void validate(const ChunkingParams& p) {
  if (p.window < 1 || p.stride < 1 || p.stride > p.window) {
    throw ContractViolation("chunking needs window >= 1 and 1 <= stride <= "
                            "window, got window=" + std::to_string(p.window) +
                            " stride=" + std::to_string(p.stride));
  }
}

inline std::string join_lines(const std::vector<std::string_view>& lines,
                              std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back('\n');
    out.append(lines[i]);
  }
  return out;
}

// Windows start at lines 1, 1+s, 1+2s, ... while the start is within the
// file; the last window may be partial.
inline std::vector<Chunk> chunkize(std::string_view path,
                                   std::string_view file_text,
                                   const ChunkingParams& params) {
  validate(params);
  const auto lines = text::split_lines(file_text);
  std::vector<Chunk> chunks;
  const std::size_t n = lines.size();
  for (std::size_t start = 0; start < n;
       start += static_cast<std::size_t>(params.stride)) {
    const std::size_t end =
        std::min(n, start + static_cast<std::size_t>(params.window));
    chunks.push_back(Chunk::make(std::string(path), static_cast<int>(start) + 1,
                                 static_cast<int>(end),
                                 join_lines(lines, start, end)));
  }
  return chunks;
}

struct Query {
  std::string text;
  TokenSet token_set;
};

// Last `window` lines of the prefix; optionally followed by the first
// `window` lines of the suffix.
inline Query make_query(std::string_view prefix, std::string_view suffix,
                        int window, bool include_suffix = false) {
  if (window < 1) throw ContractViolation("query window must be >= 1");
  const auto pl = text::split_lines(prefix);
  const std::size_t w = static_cast<std::size_t>(window);
  Query q;
  q.text = join_lines(pl, pl.size() > w ? pl.size() - w : 0, pl.size());
  if (include_suffix) {
    const auto sl = text::split_lines(suffix);
    const std::string head = join_lines(sl, 0, std::min(w, sl.size()));
    if (!head.empty()) {
      if (!q.text.empty()) q.text.push_back('\n');
      q.text += head;
    }
  }
  q.token_set = tokenize(q.text);
  return q;
}

struct ScoredChunk {
  Chunk chunk;
  double score = 0.0;
};

// Top-k by Jaccard score, ties by (source_path, start_line) ascending.
// Ranks 1..n are written into the returned chunks.
inline std::vector<ScoredChunk> retrieve_topk(const Query& q,
                                              const std::vector<Chunk>& pool,
                                              int k) {
  if (k < 1) throw ContractViolation("retrieve_topk needs k >= 1");
  std::vector<ScoredChunk> scored;
  scored.reserve(pool.size());
  for (const Chunk& c : pool) scored.push_back({c, jaccard(q.token_set, c.token_set)});
  auto before = [](const ScoredChunk& a, const ScoredChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.chunk.source_path, a.chunk.start_line, a.chunk.end_line) <
           std::tie(b.chunk.source_path, b.chunk.start_line, b.chunk.end_line);
  };
  const std::size_t keep = std::min(scored.size(), static_cast<std::size_t>(k));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), before);
  scored.resize(keep);
  for (std::size_t i = 0; i < scored.size(); ++i) {
    scored[i].chunk.retrieval_rank = static_cast<int>(i) + 1;
  }
  return scored;
}

}  // namespace chunkshapley
