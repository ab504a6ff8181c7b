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

#include "chunkshapley/generator.hpp"
#include "chunkshapley/prompt.hpp"
#include "chunkshapley/stub_generator.hpp"
#include "support/recognizer.hpp"

namespace cs = chunkshapley;

TEST(Pack, NumbersByPosition) {
  EXPECT_EQ(cs::pack({"a", "b"}), "<C_1>a</C_1><C_2>b</C_2>");
  EXPECT_EQ(cs::pack({}), "");
}

TEST(Render, CanonicalShapes) {
  EXPECT_EQ(cs::render(cs::prompts::control("p", "s")), "<PFX>p<SFX>s");
  EXPECT_EQ(cs::render(cs::prompts::no_retrieval("p", "s")), "<PFX>p<SFX>s<DONE><MID>");
  EXPECT_EQ(cs::render(cs::prompts::with_evidence("p", "s", {"x"})),
            "<PFX>p<SFX>s<NEED><C_1>x</C_1><DONE><MID>");
  EXPECT_EQ(cs::render(cs::prompts::selection("p", "s", {"x", "y"})),
            "<PFX>p<SFX>s<NEED><C_1>x</C_1><C_2>y</C_2><SELECT>");
}

TEST(Render, RecognizerAcceptsEveryShape) {
  const auto ctl = recognizer::parse(cs::render(cs::prompts::control("a<b", "c")), false);
  ASSERT_TRUE(ctl);
  EXPECT_EQ(ctl->shape, "control");
  const auto ev = recognizer::parse(
      cs::render(cs::prompts::with_evidence("p", "s", {"one", "two"})), false);
  ASSERT_TRUE(ev);
  EXPECT_EQ(ev->shape, "with_evidence");
  EXPECT_EQ(ev->chunks, (std::vector<std::string>{"one", "two"}));
  const auto empty = recognizer::parse(cs::render(cs::prompts::with_evidence("p", "s", {})), false);
  ASSERT_TRUE(empty);
  EXPECT_TRUE(empty->chunks.empty());
}

TEST(Validate, RejectsMalformedParts) {
  cs::PromptParts p{"p", "s", {"x"}, {cs::Marker::kDone}};
  EXPECT_THROW(cs::validate(p), cs::ContractViolation);
  p.markers = {cs::Marker::kNeed, cs::Marker::kNeed};
  EXPECT_THROW(cs::validate(p), cs::ContractViolation);
  p.markers = {cs::Marker::kPfx};
  EXPECT_THROW(cs::validate(p), cs::ContractViolation);
  p.markers = {cs::Marker::kNeed};
  EXPECT_NO_THROW(cs::validate(p));
}

TEST(MarkerNames, RoundTrip) {
  for (cs::Marker m : cs::kAllMarkers) {
    EXPECT_EQ(cs::marker_from_name(cs::marker_name(m)), m);
    EXPECT_EQ(cs::marker_from_name(cs::marker_text(m)), m);
  }
  EXPECT_FALSE(cs::marker_from_name("MAYBE"));
}

TEST(ControlSoftmax, Examples) {
  EXPECT_NEAR(cs::control_softmax({1.0, 0.0}).p_need, 0.7310586, 1e-7);
  EXPECT_NEAR(cs::control_softmax({-3.0, 3.0}).p_need, 0.0024726, 1e-7);
  EXPECT_EQ(cs::control_softmax({2.0, 2.0}).p_need, 0.5);
  const auto far = cs::control_softmax({1000.0, -1000.0});
  EXPECT_EQ(far.p_need, 1.0);
  EXPECT_EQ(far.p_done, 0.0);
  const auto d = cs::control_softmax({0.3, -1.1});
  EXPECT_NEAR(d.p_need + d.p_done, 1.0, 1e-15);
  EXPECT_THROW(cs::control_softmax({NAN, 0.0}), cs::BackendDataError);
}

TEST(ParseSelection, CoercesAndTruncates) {
  const auto r = cs::parse_selection("<KEEP> <DROP> <KEEP> <DONE>", 3);
  EXPECT_EQ(r.decisions, (std::vector<cs::Decision>{cs::Decision::kKeep, cs::Decision::kDrop,
                                                    cs::Decision::kKeep}));
  EXPECT_TRUE(r.warnings.empty());

  const auto coerced = cs::parse_selection("<KEEP><MAYBE> <DONE>", 2);
  EXPECT_EQ(coerced.decisions[1], cs::Decision::kDrop);
  EXPECT_EQ(coerced.warnings.size(), 1u);

  const auto surplus = cs::parse_selection("KEEP KEEP KEEP", 2);
  EXPECT_EQ(surplus.decisions.size(), 2u);
  EXPECT_EQ(surplus.warnings.size(), 1u);

  try {
    cs::parse_selection("<KEEP> <DONE> <KEEP>", 2);
    FAIL() << "expected ShortOutputError";
  } catch (const cs::ShortOutputError& e) {
    EXPECT_EQ(e.partial().size(), 1u);
  }
}

TEST(TruncateAtStop, EarliestStopWins) {
  EXPECT_EQ(cs::truncate_at_stop("a\n\nb", {"\n\n"}), "a");
  EXPECT_EQ(cs::truncate_at_stop("abcXdefY", {"Y", "X"}), "abc");
  EXPECT_EQ(cs::truncate_at_stop("abc", {""}), "abc");
  EXPECT_EQ(cs::truncate_at_stop("abc", {}), "abc");
}

TEST(LeftTruncate, DropsWholePrefixLinesThenEvidence) {
  cs::PromptParts p = cs::prompts::with_evidence("l1\nl2\nl3", "s", {"AAAA", "BBBB"});
  const std::size_t full = cs::codepoint_length(cs::render(p));
  EXPECT_EQ(cs::left_truncate(p, 0), p);
  EXPECT_EQ(cs::left_truncate(p, full), p);
  const auto one = cs::left_truncate(p, full - 3);
  EXPECT_EQ(one.prefix, "l2\nl3");
  const auto none = cs::left_truncate(p, full - 8);
  EXPECT_EQ(none.prefix, "");
  EXPECT_EQ(none.evidence.size(), 2u);
  const auto dropped = cs::left_truncate(p, full - 12);
  EXPECT_EQ(dropped.evidence, std::vector<std::string>{"BBBB"});
  EXPECT_THROW(cs::left_truncate(p, 3), cs::SizingError);
}

namespace {

cs::StubGenerator tiny_stub() {
  cs::StubScript s;
  s.prefix = "def f(x):\n";
  s.suffix = "\n";
  s.chunks = {"helper = 1", "noise"};
  s.base = -2.0;
  s.single = {0.4, -0.3};
  s.default_decode = "pass";
  s.rules.push_back({{1}, cs::StubScript::Match::kSuperset, "return helper"});
  s.control = {1.0, 0.0};
  cs::StubGenerator g;
  g.add_script(std::move(s));
  return g;
}

}  // namespace

TEST(Generator, ContractChecks) {
  cs::StubGenerator g = tiny_stub();
  EXPECT_THROW(g.score(cs::prompts::no_retrieval("def f(x):\n", "\n"), ""),
               cs::ContractViolation);
  EXPECT_THROW(g.generate(cs::prompts::no_retrieval("def f(x):\n", "\n"), -1, {}),
               cs::ContractViolation);
  EXPECT_EQ(g.generate(cs::prompts::no_retrieval("def f(x):\n", "\n"), 0, {}), "");
  EXPECT_THROW(g.select_raw(cs::prompts::no_retrieval("def f(x):\n", "\n"), 0),
               cs::ContractViolation);
  EXPECT_THROW(g.select_raw(cs::prompts::selection("def f(x):\n", "\n", {"a"}), 2),
               cs::ContractViolation);
  EXPECT_TRUE(g.select_tokens(cs::prompts::selection("def f(x):\n", "\n", {}), 0)
                  .decisions.empty());
}

TEST(Generator, MaxNewTokensCountsCodePoints) {
  cs::StubGenerator g = tiny_stub();
  const auto p = cs::prompts::with_evidence("def f(x):\n", "\n", {"helper = 1"});
  EXPECT_EQ(g.generate(p, 6, {}), "return");
  EXPECT_EQ(g.generate(p, 100, {" "}), "return");
}

TEST(RecordingGenerator, CountsCallsByKind) {
  cs::StubGenerator inner = tiny_stub();
  cs::RecordingGenerator rec(inner);
  const auto p = cs::prompts::no_retrieval("def f(x):\n", "\n");
  rec.score(p, "x");
  rec.generate(p, 4, {});
  rec.generate(p, 4, {});
  rec.control_logits(cs::prompts::control("def f(x):\n", "\n"));
  EXPECT_EQ(rec.count(cs::CallKind::kScore), 1u);
  EXPECT_EQ(rec.count(cs::CallKind::kGenerate), 2u);
  EXPECT_EQ(rec.count(cs::CallKind::kControl), 1u);
  EXPECT_EQ(rec.count(cs::CallKind::kSelect), 0u);
  rec.clear();
  EXPECT_TRUE(rec.calls().empty());
}
