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

// The completion backend abstraction.
//
// `Generator` is a non-virtual interface: the public entry points enforce
// shape contracts, left-truncate oversized inputs and post-process outputs,
// then delegate to the backend-specific `do_*` hooks. Backends never see an
// input that is over budget.

#pragma once

#include <cmath>
#include <cstddef>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chunkshapley/errors.hpp"
#include "chunkshapley/metrics.hpp"
#include "chunkshapley/prompt.hpp"
#include "chunkshapley/text.hpp"

namespace chunkshapley {

struct ControlLogits {
  double need = 0.0;
  double done = 0.0;
};

// Softmax restricted to {<NEED>, <DONE>}.
struct ControlDistribution {
  double p_need = 0.5;
  double p_done = 0.5;
};

inline ControlDistribution control_softmax(ControlLogits logits) {
  if (!std::isfinite(logits.need) || !std::isfinite(logits.done)) {
    throw BackendDataError("control logits must be finite");
  }
  // Two-way softmax is the logistic of the logit difference; evaluate both
  // halves in the branch where exp() cannot overflow.
  const double d = logits.need - logits.done;
  ControlDistribution out;
  if (d >= 0) {
    const double e = std::exp(-d);
    out.p_need = 1.0 / (1.0 + e);
    out.p_done = e / (1.0 + e);
  } else {
    const double e = std::exp(d);
    out.p_need = e / (1.0 + e);
    out.p_done = 1.0 / (1.0 + e);
  }
  return out;
}

// Thrown when the selection head stops before emitting k decisions.
class ShortOutputError : public BackendDataError {
 public:
  ShortOutputError(const std::string& what, std::vector<Decision> partial)
      : BackendDataError(what), partial_(std::move(partial)) {}
  const std::vector<Decision>& partial() const { return partial_; }

 private:
  std::vector<Decision> partial_;
};

struct SelectionResult {
  std::vector<Decision> decisions;
  std::vector<std::string> warnings;
};

// Parses selection-head output into exactly k decisions. Pieces are either
// `<...>` markers or whitespace-delimited words; parsing ends at <DONE>.
// Anything other than KEEP/DROP is coerced to DROP with a warning.
inline SelectionResult parse_selection(std::string_view out, std::size_t k) {
  std::vector<std::string> pieces;
  std::size_t i = 0;
  while (i < out.size()) {
    const char c = out[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    std::size_t end = i;
    if (c == '<') {
      const std::size_t close = out.find('>', i);
      end = close == std::string_view::npos ? out.size() : close + 1;
    } else {
      while (end < out.size() && out[end] != ' ' && out[end] != '\t' &&
             out[end] != '\n' && out[end] != '\r' && out[end] != '<') {
        ++end;
      }
    }
    pieces.emplace_back(out.substr(i, end - i));
    i = end;
  }

  SelectionResult result;
  for (const std::string& p : pieces) {
    if (p == marker_text(Marker::kDone) || p == "DONE") {
      break;
    }
    if (result.decisions.size() == k) {
      result.warnings.push_back("ignoring surplus selection token '" + p + "'");
      continue;
    }
    if (p == marker_text(Marker::kKeep) || p == "KEEP") {
      result.decisions.push_back(Decision::kKeep);
    } else if (p == marker_text(Marker::kDrop) || p == "DROP") {
      result.decisions.push_back(Decision::kDrop);
    } else {
      result.warnings.push_back("selection token " +
                                std::to_string(result.decisions.size() + 1) +
                                " '" + p + "' coerced to DROP");
      result.decisions.push_back(Decision::kDrop);
    }
  }
  if (result.decisions.size() < k) {
    throw ShortOutputError("selection head emitted " +
                               std::to_string(result.decisions.size()) +
                               " of " + std::to_string(k) + " decisions",
                           std::move(result.decisions));
  }
  return result;
}

inline std::string truncate_at_stop(std::string text,
                                    const std::vector<std::string>& stop) {
  std::size_t cut = text.size();
  for (const std::string& s : stop) {
    if (s.empty()) continue;
    const std::size_t pos = text.find(s);
    if (pos != std::string::npos) cut = std::min(cut, pos);
  }
  text.resize(cut);
  return text;
}

inline std::size_t codepoint_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

// Removes whole lines from the far left of the prompt until
// rendered length + reserved <= budget (code points). The prefix is consumed
// first, then evidence chunks from the left of the pack. Budget 0 means
// unlimited.
inline PromptParts left_truncate(PromptParts parts, std::size_t budget,
                                 std::size_t reserved = 0) {
  if (budget == 0) return parts;
  while (true) {
    PromptParts rest = parts;
    rest.prefix.clear();
    const std::size_t fixed = codepoint_length(render(rest)) + reserved;
    const std::size_t prefix_len = codepoint_length(parts.prefix);
    if (fixed + prefix_len <= budget) return parts;
    if (fixed <= budget) {
      const std::size_t allowed = budget - fixed;
      std::string_view p = parts.prefix;
      while (codepoint_length(p) > allowed) {
        const std::size_t nl = p.find('\n');
        p = nl == std::string_view::npos ? std::string_view{} : p.substr(nl + 1);
      }
      parts.prefix = std::string(p);
      return parts;
    }
    parts.prefix.clear();
    if (parts.evidence.empty()) {
      throw SizingError("prompt exceeds the context budget of " +
                        std::to_string(budget) +
                        " even with the prefix and all evidence removed");
    }
    parts.evidence.erase(parts.evidence.begin());
  }
}

class Generator {
 public:
  virtual ~Generator() = default;

  // Teacher-forced per-token log-probabilities of `target`. The target is
  // never truncated.
  LikelihoodScore score(const PromptParts& parts, std::string_view target) {
    if (target.empty()) throw ContractViolation("score() needs a non-empty target");
    validate(parts);
    const PromptParts fitted =
        left_truncate(parts, context_budget(), codepoint_length(target));
    LikelihoodScore s = do_score(fitted, target);
    for (double lp : s.token_logprobs) {
      if (!std::isfinite(lp)) {
        throw BackendDataError("backend returned a non-finite token logprob");
      }
    }
    if (s.token_logprobs.empty()) {
      throw BackendDataError("backend returned no token logprobs");
    }
    return s;
  }

  // Greedy continuation, cut at the first stop string.
  std::string generate(const PromptParts& parts, int max_new_tokens,
                       const std::vector<std::string>& stop) {
    if (max_new_tokens < 0) throw ContractViolation("max_new_tokens must be >= 0");
    validate(parts);
    if (max_new_tokens == 0) return {};
    const PromptParts fitted = left_truncate(parts, context_budget());
    return truncate_at_stop(do_generate(fitted, max_new_tokens, stop), stop);
  }

  // Raw logits of <NEED> and <DONE> at the position after the prompt.
  ControlLogits control_logits(const PromptParts& parts) {
    validate(parts);
    return do_control_logits(left_truncate(parts, context_budget()));
  }

  ControlDistribution control_distribution(const PromptParts& parts) {
    return control_softmax(control_logits(parts));
  }

  // Exactly k KEEP/DROP decisions for the k packed candidates; k = 0 makes
  // no backend call.
  SelectionResult select_tokens(const PromptParts& parts, std::size_t k) {
    if (k == 0) return {};
    return parse_selection(select_raw(parts, k), k);
  }

  // Unparsed selection-head output.
  std::string select_raw(const PromptParts& parts, std::size_t k) {
    validate(parts);
    if (parts.markers.empty() || parts.markers.back() != Marker::kSelect) {
      throw ContractViolation("selection prompt must end with <SELECT>");
    }
    if (parts.evidence.size() != k) {
      throw ContractViolation("selection k must equal the number of packed candidates");
    }
    // Candidates are never truncated away here: k must stay aligned with the pack.
    return do_select(parts, k);
  }

  // Maximum rendered input length in code points; 0 = unlimited.
  virtual std::size_t context_budget() const { return 0; }

 protected:
  virtual LikelihoodScore do_score(const PromptParts& parts,
                                   std::string_view target) = 0;
  virtual std::string do_generate(const PromptParts& parts, int max_new_tokens,
                                  const std::vector<std::string>& stop) = 0;
  virtual ControlLogits do_control_logits(const PromptParts& parts) = 0;
  // Raw text emitted after <SELECT>.
  virtual std::string do_select(const PromptParts& parts, std::size_t k) = 0;
};

enum class CallKind { kScore, kGenerate, kControl, kSelect };

inline std::string_view call_kind_name(CallKind k) {
  switch (k) {
    case CallKind::kScore: return "score";
    case CallKind::kGenerate: return "generate";
    case CallKind::kControl: return "control";
    case CallKind::kSelect: return "select";
  }
  return "";
}

struct CallRecord {
  CallKind kind;
  std::string prompt;  // rendered, as handed to the wrapped generator
};

// Forwards to another generator and logs every backend call.
class RecordingGenerator : public Generator {
 public:
  explicit RecordingGenerator(Generator& inner) : inner_(inner) {}

  std::vector<CallRecord> calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
  }
  std::size_t count(CallKind kind) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::size_t n = 0;
    for (const auto& c : calls_) n += c.kind == kind;
    return n;
  }
  void clear() {
    std::lock_guard<std::mutex> lock(mu_);
    calls_.clear();
  }

  std::size_t context_budget() const override { return inner_.context_budget(); }

 protected:
  LikelihoodScore do_score(const PromptParts& parts, std::string_view target) override {
    log(CallKind::kScore, parts);
    return inner_.score(parts, target);
  }
  std::string do_generate(const PromptParts& parts, int max_new_tokens,
                          const std::vector<std::string>& stop) override {
    log(CallKind::kGenerate, parts);
    return inner_.generate(parts, max_new_tokens, stop);
  }
  ControlLogits do_control_logits(const PromptParts& parts) override {
    log(CallKind::kControl, parts);
    return inner_.control_logits(parts);
  }
  std::string do_select(const PromptParts& parts, std::size_t k) override {
    log(CallKind::kSelect, parts);
    return inner_.select_raw(parts, k);
  }

 private:
  void log(CallKind kind, const PromptParts& parts) {
    std::lock_guard<std::mutex> lock(mu_);
    calls_.push_back({kind, render(parts)});
  }

  Generator& inner_;
  mutable std::mutex mu_;
  std::vector<CallRecord> calls_;
};

}  // namespace chunkshapley
