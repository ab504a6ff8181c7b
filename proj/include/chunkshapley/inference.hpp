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

// Online controller: trigger -> retrieve -> select -> filtered completion.
//
// DONE path:  control call, then one decode of <PFX>p<SFX>s<DONE><MID>.
// NEED path:  control call, top-k retrieval, one selection call over
//             Pack(candidates), then one decode of
//             <PFX>p<SFX>s<NEED>Pack(kept)<DONE><MID>.

#pragma once

#include <chrono>
#include <exception>
#include <string>
#include <vector>

#include "json.hpp"

#include "chunkshapley/errors.hpp"
#include "chunkshapley/generator.hpp"
#include "chunkshapley/prompt.hpp"
#include "chunkshapley/retrieval.hpp"

namespace chunkshapley {

struct InferenceConfig {
  double t_c = 0.5;
  int k = 10;
  ChunkingParams chunking;
  int max_new_tokens = 128;
  std::vector<std::string> stop;
  bool query_with_suffix = false;
  // Decode with the DONE template when NEED keeps nothing.
  bool empty_selection_fallback = false;
};

inline void validate(const InferenceConfig& c) {
  if (!(c.t_c >= 0.0 && c.t_c <= 1.0)) throw ContractViolation("t_c must lie in [0, 1]");
  if (c.k < 1) throw ContractViolation("k must be >= 1");
  if (c.max_new_tokens < 0) throw ContractViolation("max_new_tokens must be >= 0");
  validate(c.chunking);
}

inline nlohmann::json to_json(const InferenceConfig& c) {
  return {{"t_c", c.t_c},
          {"k", c.k},
          {"window", c.chunking.window},
          {"stride", c.chunking.stride},
          {"max_new_tokens", c.max_new_tokens},
          {"stop", c.stop},
          {"query_with_suffix", c.query_with_suffix},
          {"empty_selection_fallback", c.empty_selection_fallback}};
}

inline void apply_json(InferenceConfig& c, const nlohmann::json& j) {
  const nlohmann::json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InputFormatError("unknown infer config key '" + key + "'");
  }
  try {
    c.t_c = j.value("t_c", c.t_c);
    c.k = j.value("k", c.k);
    c.chunking.window = j.value("window", c.chunking.window);
    c.chunking.stride = j.value("stride", c.chunking.stride);
    c.max_new_tokens = j.value("max_new_tokens", c.max_new_tokens);
    c.stop = j.value("stop", c.stop);
    c.query_with_suffix = j.value("query_with_suffix", c.query_with_suffix);
    c.empty_selection_fallback = j.value("empty_selection_fallback", c.empty_selection_fallback);
  } catch (const nlohmann::json::exception& e) {
    throw InputFormatError(std::string("bad infer config value: ") + e.what());
  }
}

struct TriggerDecision {
  RetrievalControl decision = RetrievalControl::kDone;
  double p_need = 0.0;
};

// NEED iff p_need >= t_c.
inline RetrievalControl threshold(double p_need, double t_c) {
  return p_need >= t_c ? RetrievalControl::kNeed : RetrievalControl::kDone;
}

inline TriggerDecision decide(Generator& gen, const std::string& prefix,
                              const std::string& suffix, double t_c) {
  const ControlDistribution d = gen.control_distribution(prompts::control(prefix, suffix));
  return {threshold(d.p_need, t_c), d.p_need};
}

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

struct InferenceTrace {
  double t_c = 0.0;
  TriggerDecision trigger;
  std::vector<std::string> stages;  // executed, in order
  std::vector<ScoredChunk> retrieved;
  std::vector<Decision> q;
  std::vector<std::string> selection_warnings;
  std::vector<int> kept;  // 1-based retrieval ranks
  bool zero_candidates = false;
  bool used_fallback = false;
  PromptParts final_prompt;
  std::string completion;
  std::vector<StageTiming> timings;
  std::string failed_stage;
  std::string error;
  std::exception_ptr failure;

  bool ok() const { return failure == nullptr; }
  void rethrow() const {
    if (failure) std::rethrow_exception(failure);
  }
};

namespace detail {

template <typename Fn>
void stage(InferenceTrace& t, const char* name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  const std::chrono::duration<double, std::milli> took = std::chrono::steady_clock::now() - start;
  t.stages.push_back(name);
  t.timings.push_back({name, took.count()});
}

}  // namespace detail

// Never throws for stage failures: the trace records the failing stage and
// keeps the exception for rethrow().
inline InferenceTrace run(Generator& gen, const std::vector<Chunk>& pool,
                          const std::string& prefix, const std::string& suffix,
                          const InferenceConfig& cfg) {
  InferenceTrace t;
  t.t_c = cfg.t_c;
  const char* current = "config";
  try {
    validate(cfg);
    current = "control";
    detail::stage(t, current, [&] { t.trigger = decide(gen, prefix, suffix, cfg.t_c); });

    if (t.trigger.decision == RetrievalControl::kDone) {
      current = "decode";
      t.final_prompt = prompts::no_retrieval(prefix, suffix);
    } else {
      current = "retrieve";
      detail::stage(t, current, [&] {
        const Query q = make_query(prefix, suffix, cfg.chunking.window, cfg.query_with_suffix);
        t.retrieved = retrieve_topk(q, pool, cfg.k);
        t.zero_candidates = t.retrieved.empty();
      });

      current = "select";
      std::vector<std::string> candidates;
      for (const ScoredChunk& c : t.retrieved) candidates.push_back(c.chunk.text);
      detail::stage(t, current, [&] {
        const SelectionResult sel =
            gen.select_tokens(prompts::selection(prefix, suffix, candidates), candidates.size());
        t.q = sel.decisions;
        t.selection_warnings = sel.warnings;
      });

      std::vector<std::string> kept;
      for (std::size_t i = 0; i < t.q.size(); ++i) {
        if (t.q[i] == Decision::kKeep) {
          t.kept.push_back(static_cast<int>(i) + 1);
          kept.push_back(candidates[i]);
        }
      }
      if (kept.empty() && cfg.empty_selection_fallback) {
        t.used_fallback = true;
        t.final_prompt = prompts::no_retrieval(prefix, suffix);
      } else {
        t.final_prompt = prompts::with_evidence(prefix, suffix, std::move(kept));
      }
      current = "decode";
    }
    detail::stage(t, current, [&] {
      t.completion = gen.generate(t.final_prompt, cfg.max_new_tokens, cfg.stop);
    });
  } catch (const std::exception& e) {
    t.failed_stage = current;
    t.error = e.what();
    t.failure = std::current_exception();
  }
  return t;
}

inline nlohmann::json to_json(const InferenceTrace& t, bool with_timings = false) {
  nlohmann::json j;
  j["t_c"] = t.t_c;
  j["decision"] = std::string(control_name(t.trigger.decision));
  j["p_need"] = t.trigger.p_need;
  j["stages"] = t.stages;
  bool retrieved = false;
  for (const auto& s : t.stages) retrieved = retrieved || s == "retrieve";
  if (retrieved) {
    nlohmann::json r = nlohmann::json::array();
    for (const ScoredChunk& c : t.retrieved) {
      r.push_back({{"id", c.chunk.retrieval_rank},
                   {"path", c.chunk.source_path},
                   {"start", c.chunk.start_line},
                   {"end", c.chunk.end_line},
                   {"score", c.score}});
    }
    j["retrieved"] = r;
    j["zero_candidates"] = t.zero_candidates;
  }
  bool selected = false;
  for (const auto& s : t.stages) selected = selected || s == "select";
  if (selected) {
    nlohmann::json q = nlohmann::json::array();
    for (Decision d : t.q) q.push_back(std::string(decision_name(d)));
    j["q"] = q;
    j["kept"] = t.kept;
    j["selection_warnings"] = t.selection_warnings;
    j["used_fallback"] = t.used_fallback;
  }
  j["final_prompt"] = render(t.final_prompt);
  j["completion"] = t.completion;
  if (!t.ok()) j["error"] = {{"stage", t.failed_stage}, {"message", t.error}};
  if (with_timings) {
    nlohmann::json d = nlohmann::json::object();
    for (const StageTiming& s : t.timings) d[s.stage] = s.ms;
    j["durations_ms"] = d;
  }
  return j;
}

}  // namespace chunkshapley
