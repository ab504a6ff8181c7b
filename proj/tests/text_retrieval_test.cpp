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

#include <gtest/gtest.h>

#include "chunkshapley/retrieval.hpp"
#include "chunkshapley/text.hpp"

namespace cs = chunkshapley;

TEST(Utf8, PermissiveDecodeDropsInvalidBytes) {
  EXPECT_EQ(cs::text::decode_utf8("a\xFF" "b"), U"ab");
  EXPECT_EQ(cs::text::decode_utf8("\xC0\xAF"), U"");          // overlong
  EXPECT_EQ(cs::text::decode_utf8("\xED\xA0\x80x"), U"x");    // surrogate
  EXPECT_EQ(cs::text::decode_utf8("\xE2\x82"), U"");          // truncated
  EXPECT_EQ(cs::text::decode_utf8("\xC3\xA9"), U"é");
  EXPECT_EQ(cs::text::sanitize_utf8("ok\x80"), "ok");
}

TEST(Utf8, EncodeRoundTrip) {
  const std::u32string s = U"aé∑\U0001F642";
  EXPECT_EQ(cs::text::decode_utf8(cs::text::encode_utf8(s)), s);
}

TEST(SplitLines, TrailingNewlineAddsNoLine) {
  EXPECT_EQ(cs::text::split_lines("a\nb\n").size(), 2u);
  EXPECT_EQ(cs::text::split_lines("a\nb").size(), 2u);
  EXPECT_TRUE(cs::text::split_lines("").empty());
  EXPECT_EQ(cs::text::split_lines("\n\n").size(), 2u);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(cs::text::fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(cs::text::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(cs::text::hex64(0xabcull), "0000000000000abc");
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(cs::tokenize("def foo(x): return x+1"),
            (cs::TokenSet{"def", "foo", "x", "return", "1"}));
  EXPECT_TRUE(cs::tokenize("").empty());
  EXPECT_EQ(cs::tokenize("x x x"), (cs::TokenSet{"x"}));
  EXPECT_EQ(cs::tokenize("caf\xC3\xA9_bar-baz"), (cs::TokenSet{"caf\xC3\xA9_bar", "baz"}));
}

TEST(Jaccard, Examples) {
  EXPECT_EQ(cs::jaccard({"a", "b"}, {"a", "b"}), 1.0);
  EXPECT_DOUBLE_EQ(cs::jaccard({"a", "b"}, {"b", "c"}), 1.0 / 3.0);
  EXPECT_EQ(cs::jaccard({"a"}, {"b"}), 0.0);
  EXPECT_EQ(cs::jaccard({}, {}), 0.0);
}

TEST(Chunkize, WindowArithmetic) {
  const auto c = cs::chunkize("f.py", "1\n2\n3\n4\n5\n", {3, 2});
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(std::make_pair(c[0].start_line, c[0].end_line), std::make_pair(1, 3));
  EXPECT_EQ(std::make_pair(c[1].start_line, c[1].end_line), std::make_pair(3, 5));
  EXPECT_EQ(std::make_pair(c[2].start_line, c[2].end_line), std::make_pair(5, 5));
  EXPECT_EQ(c[1].text, "3\n4\n5");

  const auto short_file = cs::chunkize("g.py", "a\nb\n", {10, 5});
  ASSERT_EQ(short_file.size(), 1u);
  EXPECT_EQ(short_file[0].end_line, 2);
  EXPECT_TRUE(cs::chunkize("e.py", "", {20, 10}).empty());
}

TEST(Chunkize, RejectsBadParams) {
  EXPECT_THROW(cs::chunkize("f", "a", {0, 1}), cs::ContractViolation);
  EXPECT_THROW(cs::chunkize("f", "a", {3, 4}), cs::ContractViolation);
}

TEST(MakeQuery, LastWindowOfPrefix) {
  const cs::Query q = cs::make_query("l1\nl2\nl3\nl4", "s1\ns2", 2);
  EXPECT_EQ(q.text, "l3\nl4");
  const cs::Query qs = cs::make_query("l1\nl2\nl3\nl4", "s1\ns2\ns3", 2, true);
  EXPECT_EQ(qs.text, "l3\nl4\ns1\ns2");
}

TEST(RetrieveTopk, TieRule) {
  std::vector<cs::Chunk> pool = {
      cs::Chunk::make("b.py", 1, 2, "alpha beta"),
      cs::Chunk::make("a.py", 5, 6, "alpha beta gamma"),
      cs::Chunk::make("a.py", 1, 2, "alpha beta"),
  };
  cs::Query q;
  q.token_set = {"alpha", "beta", "gamma"};
  const auto top = cs::retrieve_topk(q, pool, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].chunk.start_line, 5);
  EXPECT_EQ(top[1].chunk.source_path, "a.py");
  EXPECT_EQ(top[1].chunk.start_line, 1);
  EXPECT_EQ(top[0].chunk.retrieval_rank, 1);
  EXPECT_EQ(top[1].chunk.retrieval_rank, 2);
}

TEST(RetrieveTopk, AllZeroScoresFallBackToPathOrder) {
  std::vector<cs::Chunk> pool = {cs::Chunk::make("z.py", 1, 1, "q"),
                                 cs::Chunk::make("a.py", 9, 9, "r"),
                                 cs::Chunk::make("a.py", 2, 2, "s")};
  cs::Query q;
  q.token_set = {"unrelated"};
  const auto top = cs::retrieve_topk(q, pool, 5);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[0].chunk.start_line, 2);
  EXPECT_EQ(top[1].chunk.start_line, 9);
  EXPECT_EQ(top[2].chunk.source_path, "z.py");
  EXPECT_TRUE(cs::retrieve_topk(q, {}, 3).empty());
  EXPECT_THROW(cs::retrieve_topk(q, pool, 0), cs::ContractViolation);
}
