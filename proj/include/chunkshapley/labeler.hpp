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

// Offline label construction:
//
//   probe -> surrogate game -> exact Shapley -> candidate pool -> verify
//         -> quality gate -> retrieval-control label -> serialization
//
// Generator-call budget per instance (surrogate utility): K+1 scoring calls
// and one greedy decode per pool entry. The empty coalition is always in the
// pool, so its decode doubles as the in-file-only baseline.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "chunkshapley/errors.hpp"
#include "chunkshapley/game.hpp"
#include "chunkshapley/generator.hpp"
#include "chunkshapley/metrics.hpp"
#include "chunkshapley/parallel.hpp"
#include "chunkshapley/prompt.hpp"
#include "chunkshapley/retrieval.hpp"

namespace chunkshapley {

struct TaskInstance {
  std::string instance_id;
  std::string repo_id;
  std::string prefix;
  std::string suffix;
  std::string target;
  std::vector<Chunk> retrieved;  // rank order, K entries

  int k() const { return static_cast<int>(retrieved.size()); }
};

// Where the coalition values fed to Shapley come from.
enum class Utility {
  kSurrogate,  // closed-form logistic game over single-chunk probes
  kLoglik,     // true teacher-forced log-likelihood gain, all 2^K subsets
  kEditSim,    // ES(decode_S) - ES(decode_empty), all 2^K subsets
  kExactMatch, // EM(decode_S) - EM(decode_empty), all 2^K subsets
};

// How verification candidates are proposed.
enum class Proposal {
  kShapley,      // Shapley prefixes + short delta prefixes + top-L combos
  kDeltaPrefix,  // delta prefixes only (single-chunk baseline)
};

struct LabelConfig {
  int k = 10;               // retrieval budget when retrieving from an index
  double beta = 1.0;        // surrogate saturation scale
  int n_v = 10;             // Shapley prefixes (clamped to K)
  int n_delta_prefix = 3;   // delta prefixes (clamped to K)
  int top_l = 3;            // combo scope among top-L by delta (clamped to K)
  double epsilon = 0.0;     // retrieval-control margin on ES gain
  double tau_es = 60.0;     // discard if ES(S*) < tau_es
  std::optional<double> tau_done;  // optional: DONE if ES(empty) >= tau_done
  int max_new_tokens = 128;
  std::vector<std::string> stop;
  bool strict_em = false;
  Utility utility = Utility::kSurrogate;
  Proposal proposal = Proposal::kShapley;
  int max_true_game_players = 12;  // guard for 2^K generator calls
  ChunkingParams chunking;
  bool query_with_suffix = false;
};

inline std::string_view utility_name(Utility u) {
  switch (u) {
    case Utility::kSurrogate: return "surrogate";
    case Utility::kLoglik: return "loglik";
    case Utility::kEditSim: return "es";
    case Utility::kExactMatch: return "em";
  }
  return "";
}

inline std::string_view proposal_name(Proposal p) {
  return p == Proposal::kShapley ? "shapley" : "delta";
}

inline nlohmann::json to_json(const LabelConfig& c) {
  return {
      {"k", c.k},
      {"beta", c.beta},
      {"n_v", c.n_v},
      {"n_delta_prefix", c.n_delta_prefix},
      {"top_l", c.top_l},
      {"epsilon", c.epsilon},
      {"tau_es", c.tau_es},
      {"tau_done", c.tau_done ? nlohmann::json(*c.tau_done) : nlohmann::json(nullptr)},
      {"max_new_tokens", c.max_new_tokens},
      {"stop", c.stop},
      {"strict_em", c.strict_em},
      {"utility", std::string(utility_name(c.utility))},
      {"proposal", std::string(proposal_name(c.proposal))},
      {"max_true_game_players", c.max_true_game_players},
      {"window", c.chunking.window},
      {"stride", c.chunking.stride},
      {"query_with_suffix", c.query_with_suffix},
  };
}

inline void apply_json(LabelConfig& c, const nlohmann::json& j) {
  const nlohmann::json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InputFormatError("unknown label config key '" + key + "'");
  }
  try {
    c.k = j.value("k", c.k);
    c.beta = j.value("beta", c.beta);
    c.n_v = j.value("n_v", c.n_v);
    c.n_delta_prefix = j.value("n_delta_prefix", c.n_delta_prefix);
    c.top_l = j.value("top_l", c.top_l);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.tau_es = j.value("tau_es", c.tau_es);
    if (j.contains("tau_done")) {
      c.tau_done = j.at("tau_done").is_null()
                       ? std::nullopt
                       : std::optional<double>(j.at("tau_done").get<double>());
    }
    c.max_new_tokens = j.value("max_new_tokens", c.max_new_tokens);
    c.stop = j.value("stop", c.stop);
    c.strict_em = j.value("strict_em", c.strict_em);
    if (j.contains("utility")) {
      const std::string u = j.at("utility").get<std::string>();
      if (u == "surrogate") c.utility = Utility::kSurrogate;
      else if (u == "loglik") c.utility = Utility::kLoglik;
      else if (u == "es") c.utility = Utility::kEditSim;
      else if (u == "em") c.utility = Utility::kExactMatch;
      else throw InputFormatError("unknown utility '" + u + "'");
    }
    if (j.contains("proposal")) {
      const std::string p = j.at("proposal").get<std::string>();
      if (p == "shapley") c.proposal = Proposal::kShapley;
      else if (p == "delta") c.proposal = Proposal::kDeltaPrefix;
      else throw InputFormatError("unknown proposal '" + p + "'");
    }
    c.max_true_game_players = j.value("max_true_game_players", c.max_true_game_players);
    c.chunking.window = j.value("window", c.chunking.window);
    c.chunking.stride = j.value("stride", c.chunking.stride);
    c.query_with_suffix = j.value("query_with_suffix", c.query_with_suffix);
  } catch (const nlohmann::json::exception& e) {
    throw InputFormatError(std::string("bad label config value: ") + e.what());
  }
}

inline void validate(const LabelConfig& c) {
  if (!(c.beta > 0.0)) throw ContractViolation("beta must be > 0");
  if (c.k < 1) throw ContractViolation("k must be >= 1");
  if (c.n_v < 0 || c.n_delta_prefix < 0 || c.top_l < 0) {
    throw ContractViolation("n_v, n_delta_prefix and top_l must be >= 0");
  }
  if (c.max_new_tokens < 0) throw ContractViolation("max_new_tokens must be >= 0");
  validate(c.chunking);
}

// ---------------------------------------------------------------------------
// Probing

struct ProbeResult {
  double ell_base = 0.0;
  std::vector<double> ell;    // l({i})
  std::vector<double> delta;  // l({i}) - l(empty)
  std::vector<Vote> votes;
};

inline std::vector<std::string> chunk_texts(const TaskInstance& inst, Coalition s) {
  std::vector<std::string> out;
  for (int i : s.members()) out.push_back(inst.retrieved[i].text);
  return out;
}

// Prompt for decoding or scoring under coalition S.
inline PromptParts coalition_prompt(const TaskInstance& inst, Coalition s) {
  if (s.empty()) return prompts::no_retrieval(inst.prefix, inst.suffix);
  return prompts::with_evidence(inst.prefix, inst.suffix, chunk_texts(inst, s));
}

inline double coalition_loglik(const TaskInstance& inst, Coalition s, Generator& gen) {
  return normalized_loglik(gen.score(coalition_prompt(inst, s), inst.target));
}

inline ProbeResult probe(const TaskInstance& inst, Generator& gen) {
  if (inst.k() < 1) throw ContractViolation("probe needs at least one retrieved chunk");
  if (inst.target.empty()) throw ContractViolation("instance target must be non-empty");
  ProbeResult r;
  r.ell_base = coalition_loglik(inst, Coalition{}, gen);
  for (int i = 0; i < inst.k(); ++i) {
    const double l = coalition_loglik(inst, Coalition::from_indices({i}), gen);
    r.ell.push_back(l);
    r.delta.push_back(l - r.ell_base);
    r.votes.push_back(delta_effect(l, r.ell_base));
  }
  return r;
}

inline SurrogateGame build_surrogate(const ProbeResult& probe, double beta) {
  return SurrogateGame(beta, probe.votes);
}

// ---------------------------------------------------------------------------
// Candidate pool

enum class Provenance { kEmptyBaseline, kShapleyPrefix, kDeltaPrefix, kCombo2, kCombo3 };

inline std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kEmptyBaseline: return "empty-baseline";
    case Provenance::kShapleyPrefix: return "shapley-prefix";
    case Provenance::kDeltaPrefix: return "delta-prefix";
    case Provenance::kCombo2: return "combo2";
    case Provenance::kCombo3: return "combo3";
  }
  return "";
}

struct CandidatePool {
  std::vector<Coalition> coalitions;
  std::vector<Provenance> provenance;

  std::size_t size() const { return coalitions.size(); }

  // First occurrence wins.
  void add(Coalition s, Provenance p) {
    if (std::find(coalitions.begin(), coalitions.end(), s) != coalitions.end()) return;
    coalitions.push_back(s);
    provenance.push_back(p);
  }
};

inline Coalition prefix_coalition(std::span<const int> rank, int n) {
  return Coalition::from_indices(rank.subspan(0, static_cast<std::size_t>(n)));
}

inline void check_rank(std::span<const int> rank, int k) {
  if (static_cast<int>(rank.size()) != k) {
    throw ContractViolation("rankings must cover the same K players");
  }
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int i : rank) {
    if (i < 0 || i >= k || seen[i]) throw ContractViolation("ranking is not a permutation");
    seen[i] = true;
  }
}

// {empty} + Shapley prefixes (n = 1..n_v) + delta prefixes (n = 1..n_delta)
// + all 2- and 3-subsets of the top-L chunks by delta, de-duplicated in that
// order. Rankings hold 0-based player indices.
inline CandidatePool build_pool(std::span<const int> phi_rank, std::span<const int> delta_rank,
                                int n_v, int n_delta_prefix, int top_l) {
  const int k = static_cast<int>(phi_rank.size());
  check_rank(phi_rank, k);
  check_rank(delta_rank, k);
  if (n_v < 0 || n_v > k || n_delta_prefix < 0 || n_delta_prefix > k || top_l < 0 ||
      top_l > k) {
    throw ContractViolation("pool parameters must lie in [0, K]");
  }
  CandidatePool pool;
  pool.add(Coalition{}, Provenance::kEmptyBaseline);
  for (int n = 1; n <= n_v; ++n) pool.add(prefix_coalition(phi_rank, n), Provenance::kShapleyPrefix);
  for (int n = 1; n <= n_delta_prefix; ++n) {
    pool.add(prefix_coalition(delta_rank, n), Provenance::kDeltaPrefix);
  }
  for (int a = 0; a < top_l; ++a) {
    for (int b = a + 1; b < top_l; ++b) {
      pool.add(Coalition::from_indices({delta_rank[a], delta_rank[b]}), Provenance::kCombo2);
    }
  }
  for (int a = 0; a < top_l; ++a) {
    for (int b = a + 1; b < top_l; ++b) {
      for (int c = b + 1; c < top_l; ++c) {
        pool.add(Coalition::from_indices({delta_rank[a], delta_rank[b], delta_rank[c]}),
                 Provenance::kCombo3);
      }
    }
  }
  return pool;
}

// Single-chunk baseline: {empty} + delta prefixes n = 1..n_prefix.
inline CandidatePool build_delta_pool(std::span<const int> delta_rank, int n_prefix) {
  const int k = static_cast<int>(delta_rank.size());
  check_rank(delta_rank, k);
  if (n_prefix < 0 || n_prefix > k) throw ContractViolation("n_prefix must lie in [0, K]");
  CandidatePool pool;
  pool.add(Coalition{}, Provenance::kEmptyBaseline);
  for (int n = 1; n <= n_prefix; ++n) {
    pool.add(prefix_coalition(delta_rank, n), Provenance::kDeltaPrefix);
  }
  return pool;
}

inline std::size_t binomial(int n, int r) {
  if (r < 0 || r > n) return 0;
  std::size_t out = 1;
  for (int i = 1; i <= r; ++i) {
    out = out * static_cast<std::size_t>(n - r + i) / static_cast<std::size_t>(i);
  }
  return out;
}

inline std::size_t pool_size_bound(int n_v, int n_delta_prefix, int top_l) {
  return 1 + static_cast<std::size_t>(n_v) + static_cast<std::size_t>(n_delta_prefix) +
         binomial(top_l, 2) + binomial(top_l, 3);
}

// ---------------------------------------------------------------------------
// Verification

struct DecodeRecord {
  std::string text;
  double es = 0.0;
  int em = 0;
};

struct Verification {
  std::size_t winner = 0;  // index into the pool
  std::vector<DecodeRecord> decodes;
};

// Winner maximizes (ES, EM) lexicographically; then smaller |S|; then
// earlier pool position.
inline std::size_t select_winner(const CandidatePool& pool,
                                 const std::vector<DecodeRecord>& decodes) {
  if (pool.size() == 0 || decodes.size() != pool.size()) {
    throw ContractViolation("verification needs one decode per pool entry");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    const DecodeRecord& a = decodes[i];
    const DecodeRecord& b = decodes[best];
    bool better = false;
    if (a.es != b.es) {
      better = a.es > b.es;
    } else if (a.em != b.em) {
      better = a.em > b.em;
    } else {
      better = pool.coalitions[i].size() < pool.coalitions[best].size();
    }
    if (better) best = i;
  }
  return best;
}

inline DecodeRecord decode_and_score(const TaskInstance& inst, Coalition s, Generator& gen,
                                     const LabelConfig& cfg) {
  DecodeRecord d;
  d.text = gen.generate(coalition_prompt(inst, s), cfg.max_new_tokens, cfg.stop);
  d.es = edit_similarity(d.text, inst.target);
  d.em = exact_match(d.text, inst.target, cfg.strict_em);
  return d;
}

inline Verification verify(const TaskInstance& inst, const CandidatePool& pool, Generator& gen,
                           const LabelConfig& cfg) {
  if (pool.size() == 0) throw ContractViolation("verification pool is empty");
  Verification v;
  for (Coalition s : pool.coalitions) v.decodes.push_back(decode_and_score(inst, s, gen, cfg));
  v.winner = select_winner(pool, v.decodes);
  return v;
}

// DONE iff the verified coalition gains at most eps ES over the empty one.
inline RetrievalControl retrieval_control(double es_star, double es_empty, double eps) {
  return es_star - es_empty <= eps ? RetrievalControl::kDone : RetrievalControl::kNeed;
}

// True = keep. Discards strictly below the threshold.
inline bool quality_gate(double es_star, double tau_es) { return !(es_star < tau_es); }

// ---------------------------------------------------------------------------
// Serialization

enum class Format { kF1, kF2, kNoRetrieval };

inline std::string_view format_name(Format f) {
  switch (f) {
    case Format::kF1: return "F1";
    case Format::kF2: return "F2";
    case Format::kNoRetrieval: return "NO_RETRIEVAL";
  }
  return "";
}

// Half-open byte range [start, end) of a supervised region.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct TrainingInstance {
  Format format = Format::kF1;
  std::string token_stream;
  std::vector<Span> loss_mask_spans;
};

struct VerifiedLabel {
  Coalition s_star;
  RetrievalControl r_star = RetrievalControl::kDone;
  std::vector<Decision> q;
  double es_star = 0.0;
  double es_empty = 0.0;
};

namespace detail {

class StreamBuilder {
 public:
  void text(std::string_view s) { out_ += s; }
  void supervised(std::string_view s) {
    spans_.push_back({out_.size(), out_.size() + s.size()});
    out_ += s;
  }
  TrainingInstance finish(Format f) { return {f, std::move(out_), std::move(spans_)}; }

 private:
  std::string out_;
  std::vector<Span> spans_;
};

inline void in_file_context(StreamBuilder& b, const TaskInstance& inst) {
  b.text(marker_text(Marker::kPfx));
  b.text(inst.prefix);
  b.text(marker_text(Marker::kSfx));
  b.text(inst.suffix);
}

}  // namespace detail

// F1:  <PFX>p<SFX>s<NEED>Pack(all)<SELECT> q_1 ... q_K <DONE>
// F2:  <PFX>p<SFX>s<NEED>Pack(S*)<DONE><MID>Y
// NO_RETRIEVAL: <PFX>p<SFX>s<DONE><MID>Y
// Supervised: the retrieval-control token, selection tokens (F1) and Y
// (F2 / NO_RETRIEVAL).
inline TrainingInstance serialize(const TaskInstance& inst, const VerifiedLabel& label,
                                  Format format) {
  const bool need = label.r_star == RetrievalControl::kNeed;
  if ((format == Format::kNoRetrieval) == need) {
    throw ContractViolation(std::string(format_name(format)) +
                            " does not match retrieval label " +
                            std::string(control_name(label.r_star)));
  }
  if (format == Format::kF2 && label.s_star.empty()) {
    throw ContractViolation("F2 needs a non-empty verified coalition");
  }
  if (format == Format::kF1 && label.q.size() != inst.retrieved.size()) {
    throw ContractViolation("F1 needs one selection label per retrieved chunk");
  }
  detail::StreamBuilder b;
  detail::in_file_context(b, inst);
  switch (format) {
    case Format::kF1: {
      std::vector<std::string> all;
      for (const Chunk& c : inst.retrieved) all.push_back(c.text);
      b.supervised(marker_text(Marker::kNeed));
      b.text(pack(all));
      b.text(marker_text(Marker::kSelect));
      for (Decision d : label.q) {
        b.text(" ");
        b.supervised(marker_text(d == Decision::kKeep ? Marker::kKeep : Marker::kDrop));
      }
      b.text(" ");
      b.text(marker_text(Marker::kDone));
      break;
    }
    case Format::kF2:
      b.supervised(marker_text(Marker::kNeed));
      b.text(pack(chunk_texts(inst, label.s_star)));
      b.text(marker_text(Marker::kDone));
      b.text(marker_text(Marker::kMid));
      b.supervised(inst.target);
      break;
    case Format::kNoRetrieval:
      b.supervised(marker_text(Marker::kDone));
      b.text(marker_text(Marker::kMid));
      b.supervised(inst.target);
      break;
  }
  return b.finish(format);
}

// ---------------------------------------------------------------------------
// True-utility games (utility ablation; 2^K generator calls)

inline TabulatedGame tabulate_true_game(const TaskInstance& inst, Generator& gen,
                                        Utility utility, const LabelConfig& cfg) {
  const int k = inst.k();
  if (k > cfg.max_true_game_players) {
    throw SizingError("true-utility game with K=" + std::to_string(k) +
                      " exceeds max_true_game_players=" +
                      std::to_string(cfg.max_true_game_players));
  }
  const std::uint32_t n = 1u << k;
  std::vector<double> raw(n);
  for (std::uint32_t m = 0; m < n; ++m) {
    const Coalition s(m);
    switch (utility) {
      case Utility::kLoglik:
        raw[m] = coalition_loglik(inst, s, gen);
        break;
      case Utility::kEditSim:
        raw[m] = decode_and_score(inst, s, gen, cfg).es;
        break;
      case Utility::kExactMatch:
        raw[m] = decode_and_score(inst, s, gen, cfg).em;
        break;
      case Utility::kSurrogate:
        throw ContractViolation("the surrogate utility is closed-form, not tabulated");
    }
  }
  std::vector<double> values(n);
  for (std::uint32_t m = 0; m < n; ++m) values[m] = raw[m] - raw[0];
  values[0] = 0.0;
  return TabulatedGame(k, std::move(values));
}

// ---------------------------------------------------------------------------
// End-to-end

enum class LabelStatus { kLabeled, kDiscarded, kFailed };

inline std::string_view status_name(LabelStatus s) {
  switch (s) {
    case LabelStatus::kLabeled: return "labeled";
    case LabelStatus::kDiscarded: return "discarded";
    case LabelStatus::kFailed: return "failed";
  }
  return "";
}

struct LabelOutcome {
  LabelStatus status = LabelStatus::kFailed;
  std::string instance_id;
  ProbeResult probe;
  ShapleyAttribution shapley;
  CandidatePool pool;
  Verification verification;
  VerifiedLabel label;
  std::vector<TrainingInstance> training;
  std::string discard_reason;
  std::string failed_stage;
  std::string error;
  std::string error_kind;  // transport | sizing | backend | capability | contract | other
};

namespace detail {

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const TransportError*>(&e)) return "transport";
  if (dynamic_cast<const SizingError*>(&e)) return "sizing";
  if (dynamic_cast<const CapabilityError*>(&e)) return "capability";
  if (dynamic_cast<const BackendDataError*>(&e)) return "backend";
  if (dynamic_cast<const ContractViolation*>(&e)) return "contract";
  return "other";
}

}  // namespace detail

// Never throws for per-instance failures; they come back as kFailed with the
// stage that raised.
inline LabelOutcome label_instance(const TaskInstance& inst, Generator& gen,
                                   const LabelConfig& cfg) {
  LabelOutcome out;
  out.instance_id = inst.instance_id;
  std::string stage = "config";
  try {
    validate(cfg);
    const int k = inst.k();
    if (k < 1) throw ContractViolation("instance has no retrieved chunks");

    stage = "probe";
    out.probe = probe(inst, gen);

    stage = "shapley";
    if (cfg.utility == Utility::kSurrogate) {
      out.shapley = exact_shapley_surrogate(build_surrogate(out.probe, cfg.beta));
    } else {
      out.shapley = exact_shapley_tabulated(tabulate_true_game(inst, gen, cfg.utility, cfg));
    }

    stage = "pool";
    const std::vector<int> phi_rank = rank_descending(out.shapley.phi);
    const std::vector<int> delta_rank = rank_descending(out.probe.delta);
    if (cfg.proposal == Proposal::kShapley) {
      out.pool = build_pool(phi_rank, delta_rank, std::min(cfg.n_v, k),
                            std::min(cfg.n_delta_prefix, k), std::min(cfg.top_l, k));
    } else {
      out.pool = build_delta_pool(delta_rank, std::min(cfg.n_v, k));
    }

    stage = "verify";
    out.verification = verify(inst, out.pool, gen, cfg);

    stage = "label";
    VerifiedLabel& label = out.label;
    label.s_star = out.pool.coalitions[out.verification.winner];
    label.es_star = out.verification.decodes[out.verification.winner].es;
    label.es_empty = out.verification.decodes[0].es;  // pool[0] is always empty
    label.q.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      label.q[i] = label.s_star.contains(i) ? Decision::kKeep : Decision::kDrop;
    }
    label.r_star = retrieval_control(label.es_star, label.es_empty, cfg.epsilon);
    if (cfg.tau_done && label.es_empty >= *cfg.tau_done) label.r_star = RetrievalControl::kDone;

    if (!quality_gate(label.es_star, cfg.tau_es)) {
      out.status = LabelStatus::kDiscarded;
      out.discard_reason = "es-below-tau";
      return out;
    }

    stage = "serialize";
    if (label.r_star == RetrievalControl::kNeed) {
      out.training.push_back(serialize(inst, label, Format::kF1));
      out.training.push_back(serialize(inst, label, Format::kF2));
    } else {
      out.training.push_back(serialize(inst, label, Format::kNoRetrieval));
    }
    out.status = LabelStatus::kLabeled;
  } catch (const std::exception& e) {
    out.status = LabelStatus::kFailed;
    out.failed_stage = stage;
    out.error = e.what();
    out.error_kind = detail::error_kind(e);
  }
  return out;
}

inline std::vector<LabelOutcome> label_batch(const std::vector<TaskInstance>& instances,
                                             Generator& gen, const LabelConfig& cfg,
                                             int jobs = 1) {
  std::vector<LabelOutcome> out(instances.size());
  parallel_for(instances.size(), jobs,
               [&](std::size_t i) { out[i] = label_instance(instances[i], gen, cfg); });
  return out;
}

// ---------------------------------------------------------------------------
// JSON I/O

inline nlohmann::json coalition_json(Coalition s) {
  nlohmann::json a = nlohmann::json::array();
  for (int i : s.members()) a.push_back(i + 1);
  return a;
}

inline nlohmann::json to_json(const LabelOutcome& o) {
  nlohmann::json j;
  j["instance_id"] = o.instance_id;
  j["status"] = std::string(status_name(o.status));
  if (o.status == LabelStatus::kFailed) {
    j["stage"] = o.failed_stage;
    j["error_kind"] = o.error_kind;
    j["error"] = o.error;
    return j;
  }
  j["s_star"] = coalition_json(o.label.s_star);
  j["r_star"] = std::string(control_name(o.label.r_star));
  nlohmann::json q = nlohmann::json::array();
  for (Decision d : o.label.q) q.push_back(std::string(decision_name(d)));
  j["q"] = q;
  j["es_star"] = o.label.es_star;
  j["es_empty"] = o.label.es_empty;
  j["phi"] = o.shapley.phi;
  j["efficiency_residual"] = o.shapley.efficiency_residual;
  j["delta"] = o.probe.delta;
  nlohmann::json pool = nlohmann::json::array();
  nlohmann::json prov = nlohmann::json::array();
  for (std::size_t i = 0; i < o.pool.size(); ++i) {
    pool.push_back(coalition_json(o.pool.coalitions[i]));
    prov.push_back(std::string(provenance_name(o.pool.provenance[i])));
  }
  j["pool"] = pool;
  j["pool_provenance"] = prov;
  nlohmann::json decodes = nlohmann::json::array();
  for (const auto& d : o.verification.decodes) {
    decodes.push_back({{"text", d.text}, {"es", d.es}, {"em", d.em}});
  }
  j["decodes"] = decodes;
  if (o.status == LabelStatus::kDiscarded) j["discard_reason"] = o.discard_reason;
  return j;
}

inline nlohmann::json to_json(const TrainingInstance& t) {
  nlohmann::json spans = nlohmann::json::array();
  for (const Span& s : t.loss_mask_spans) spans.push_back({s.start, s.end});
  return {{"format", std::string(format_name(t.format))},
          {"token_stream", t.token_stream},
          {"loss_mask_spans", spans}};
}

// First line of training JSONL: the literal control-token strings.
inline nlohmann::json training_header() {
  nlohmann::json tokens = nlohmann::json::object();
  for (Marker m : kAllMarkers) tokens[std::string(marker_name(m))] = std::string(marker_text(m));
  return {{"header",
           {{"control_tokens", tokens},
            {"chunk_open", "<C_{i}>"},
            {"chunk_close", "</C_{i}>"},
            {"span_units", "utf8-bytes, half-open"}}}};
}

inline Chunk chunk_from_json(const nlohmann::json& c) {
  if (c.is_string()) return Chunk::make("", 0, 0, c.get<std::string>());
  return Chunk::make(c.value("path", ""), c.value("start", 0), c.value("end", 0),
                     c.at("text").get<std::string>());
}

inline nlohmann::json to_json(const Chunk& c) {
  return {{"path", c.source_path}, {"start", c.start_line}, {"end", c.end_line}, {"text", c.text}};
}

// Parses {instance_id?, repo_id, prefix, suffix, target, chunks[]?}.
// `line_no` names instances that carry no id.
inline TaskInstance instance_from_json(const nlohmann::json& j, std::size_t line_no) {
  try {
    TaskInstance t;
    t.repo_id = j.value("repo_id", "");
    t.instance_id = j.contains("instance_id") ? j.at("instance_id").get<std::string>()
                                              : t.repo_id + "#" + std::to_string(line_no);
    t.prefix = j.at("prefix").get<std::string>();
    t.suffix = j.value("suffix", "");
    t.target = j.at("target").get<std::string>();
    for (const auto& c : j.value("chunks", nlohmann::json::array())) {
      t.retrieved.push_back(chunk_from_json(c));
      t.retrieved.back().retrieval_rank = static_cast<int>(t.retrieved.size());
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InputFormatError("instance on line " + std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace chunkshapley
