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

// Deterministic scripted backend for tests and offline runs.
//
// Fixture schema (JSON):
//
//   {
//     "context_budget": 0,
//     "score_table":  [{"context_hash": "<hex>", "target": "...",
//                       "token_logprobs": [...]}],
//     "decode_table": [{"context_hash": "<hex>", "text": "..."}],
//     "scripts": [{
//       "prefix": "...", "suffix": "...",
//       "chunks": ["chunk text 1", ...],
//       "loglik": {"base": -2.0, "single": [0.4, -0.3],
//                  "pairs": [{"members": [1, 2], "bonus": 0.5}]},
//       "decode": {"default": "...",
//                  "rules": [{"evidence": [1, 2], "match": "exact",
//                             "text": "..."}]},
//       "control_logits": {"need": 1.0, "done": 0.0},
//       "select": ["KEEP", "DROP"]
//     }]
//   }
//
// Table entries are keyed by fnv1a64 of the rendered prompt and win over
// scripts. Scripts are matched on suffix equality plus the script prefix
// ending with the (possibly left-truncated) prompt prefix. Evidence is
// mapped back to 1-based script chunk ids by exact text; unknown evidence
// is inert.
//
// Scripted log-likelihood of a coalition S:
//   l(S) = base + sum_{i in S} single[i] + sum_{pairs p subset of S} bonus_p
// reported as one logprob per target code point, each equal to l(S).

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "chunkshapley/errors.hpp"
#include "chunkshapley/generator.hpp"
#include "chunkshapley/text.hpp"

namespace chunkshapley {

inline std::string context_hash(const PromptParts& parts) {
  return text::hex64(text::fnv1a64(render(parts)));
}

struct StubScript {
  enum class Match { kExact, kSuperset };

  struct PairBonus {
    std::set<int> members;
    double bonus = 0.0;
  };
  struct DecodeRule {
    std::set<int> evidence;
    Match match = Match::kExact;
    std::string text;
  };

  std::string prefix;
  std::string suffix;
  std::vector<std::string> chunks;
  double base = 0.0;
  std::vector<double> single;
  std::vector<PairBonus> pairs;
  std::string default_decode;
  std::vector<DecodeRule> rules;
  ControlLogits control{0.0, 0.0};
  std::optional<std::vector<std::string>> select;

  // 1-based ids of evidence texts known to this script.
  std::set<int> evidence_ids(const std::vector<std::string>& evidence) const {
    std::set<int> ids;
    for (const std::string& e : evidence) {
      for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (chunks[i] == e) {
          ids.insert(static_cast<int>(i) + 1);
          break;
        }
      }
    }
    return ids;
  }

  double loglik(const std::set<int>& ids) const {
    double l = base;
    for (int id : ids) {
      if (static_cast<std::size_t>(id) <= single.size()) l += single[id - 1];
    }
    for (const PairBonus& p : pairs) {
      if (std::includes(ids.begin(), ids.end(), p.members.begin(), p.members.end())) {
        l += p.bonus;
      }
    }
    return l;
  }

  const std::string& decode(const std::set<int>& ids) const {
    for (const DecodeRule& r : rules) {
      const bool hit = r.match == Match::kExact
                           ? ids == r.evidence
                           : std::includes(ids.begin(), ids.end(),
                                           r.evidence.begin(), r.evidence.end());
      if (hit) return r.text;
    }
    return default_decode;
  }
};

class StubGenerator : public Generator {
 public:
  StubGenerator() = default;

  static StubGenerator from_json(const nlohmann::json& j);
  static StubGenerator from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputFormatError("cannot open stub fixture " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputFormatError("stub fixture " + path + ": " + e.what());
    }
    return from_json(j);
  }

  void add_script(StubScript s) { scripts_.push_back(std::move(s)); }
  void add_score_entry(std::string hash, std::string target, std::vector<double> lps) {
    score_table_[{std::move(hash), std::move(target)}] = std::move(lps);
  }
  void add_decode_entry(std::string hash, std::string out) {
    decode_table_[std::move(hash)] = std::move(out);
  }
  void set_context_budget(std::size_t b) { budget_ = b; }

  std::size_t context_budget() const override { return budget_; }
  const std::vector<StubScript>& scripts() const { return scripts_; }

 protected:
  LikelihoodScore do_score(const PromptParts& parts, std::string_view target) override {
    const auto it = score_table_.find({context_hash(parts), std::string(target)});
    if (it != score_table_.end()) return {it->second};
    const StubScript& s = script_for(parts);
    const double l = s.loglik(s.evidence_ids(parts.evidence));
    return {std::vector<double>(codepoint_length(target), l)};
  }

  std::string do_generate(const PromptParts& parts, int max_new_tokens,
                          const std::vector<std::string>&) override {
    std::string out;
    const auto it = decode_table_.find(context_hash(parts));
    if (it != decode_table_.end()) {
      out = it->second;
    } else {
      const StubScript& s = script_for(parts);
      out = s.decode(s.evidence_ids(parts.evidence));
    }
    // One stub token per code point.
    const std::u32string cps = text::decode_utf8(out);
    if (cps.size() > static_cast<std::size_t>(max_new_tokens)) {
      return text::encode_utf8(
          std::u32string_view(cps).substr(0, static_cast<std::size_t>(max_new_tokens)));
    }
    return out;
  }

  ControlLogits do_control_logits(const PromptParts& parts) override {
    return script_for(parts).control;
  }

  std::string do_select(const PromptParts& parts, std::size_t k) override {
    const StubScript& s = script_for(parts);
    std::string out;
    if (s.select) {
      for (const std::string& t : *s.select) {
        const auto m = marker_from_name(t);
        out += m ? std::string(marker_text(*m)) : t;
        out += ' ';
      }
    } else {
      for (std::size_t i = 0; i < k; ++i) {
        out += marker_text(Marker::kKeep);
        out += ' ';
      }
    }
    out += marker_text(Marker::kDone);
    return out;
  }

 private:
  const StubScript& script_for(const PromptParts& parts) const {
    for (const StubScript& s : scripts_) {
      if (s.suffix == parts.suffix && s.prefix.ends_with(parts.prefix)) return s;
    }
    throw BackendDataError("stub has no script for prompt with context hash " +
                           context_hash(parts));
  }

  std::size_t budget_ = 0;
  std::vector<StubScript> scripts_;
  std::map<std::pair<std::string, std::string>, std::vector<double>> score_table_;
  std::map<std::string, std::string> decode_table_;
};

namespace detail {

inline std::set<int> parse_id_set(const nlohmann::json& arr) {
  std::set<int> ids;
  for (const auto& v : arr) {
    const int id = v.get<int>();
    if (id < 1) throw InputFormatError("stub chunk ids are 1-based");
    ids.insert(id);
  }
  return ids;
}

}  // namespace detail

inline StubGenerator StubGenerator::from_json(const nlohmann::json& j) {
  StubGenerator g;
  try {
    g.budget_ = j.value("context_budget", std::size_t{0});
    for (const auto& e : j.value("score_table", nlohmann::json::array())) {
      g.add_score_entry(e.at("context_hash").get<std::string>(),
                        e.at("target").get<std::string>(),
                        e.at("token_logprobs").get<std::vector<double>>());
    }
    for (const auto& e : j.value("decode_table", nlohmann::json::array())) {
      g.add_decode_entry(e.at("context_hash").get<std::string>(),
                         e.at("text").get<std::string>());
    }
    for (const auto& sj : j.value("scripts", nlohmann::json::array())) {
      StubScript s;
      s.prefix = sj.value("prefix", "");
      s.suffix = sj.value("suffix", "");
      s.chunks = sj.value("chunks", std::vector<std::string>{});
      if (sj.contains("loglik")) {
        const auto& lj = sj.at("loglik");
        s.base = lj.value("base", 0.0);
        s.single = lj.value("single", std::vector<double>{});
        for (const auto& pj : lj.value("pairs", nlohmann::json::array())) {
          s.pairs.push_back({detail::parse_id_set(pj.at("members")),
                             pj.at("bonus").get<double>()});
        }
      }
      if (sj.contains("decode")) {
        const auto& dj = sj.at("decode");
        s.default_decode = dj.value("default", "");
        for (const auto& rj : dj.value("rules", nlohmann::json::array())) {
          StubScript::DecodeRule r;
          r.evidence = detail::parse_id_set(rj.at("evidence"));
          const std::string match = rj.value("match", "exact");
          if (match == "exact") {
            r.match = StubScript::Match::kExact;
          } else if (match == "superset") {
            r.match = StubScript::Match::kSuperset;
          } else {
            throw InputFormatError("unknown decode rule match '" + match + "'");
          }
          r.text = rj.at("text").get<std::string>();
          s.rules.push_back(std::move(r));
        }
      }
      if (sj.contains("control_logits")) {
        s.control = {sj.at("control_logits").value("need", 0.0),
                     sj.at("control_logits").value("done", 0.0)};
      }
      if (sj.contains("select")) {
        s.select = sj.at("select").get<std::vector<std::string>>();
      }
      g.add_script(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputFormatError(std::string("malformed stub fixture: ") + e.what());
  }
  return g;
}

}  // namespace chunkshapley
