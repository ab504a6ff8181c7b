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

// Control-token vocabulary and the deterministic prompt layout shared by
// labeling, training serialization and inference.
//
// Layout of a rendered prompt:
//
//   <PFX>prefix<SFX>suffix M1 M2 ...
//
// where each marker Mi is emitted verbatim (no separators) and the packed
// evidence block follows the <NEED> marker. Evidence without <NEED> is a
// contract violation.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chunkshapley/errors.hpp"

namespace chunkshapley {

enum class Marker { kPfx, kSfx, kNeed, kDone, kSelect, kMid, kKeep, kDrop };

inline constexpr std::string_view marker_text(Marker m) {
  switch (m) {
    case Marker::kPfx: return "<PFX>";
    case Marker::kSfx: return "<SFX>";
    case Marker::kNeed: return "<NEED>";
    case Marker::kDone: return "<DONE>";
    case Marker::kSelect: return "<SELECT>";
    case Marker::kMid: return "<MID>";
    case Marker::kKeep: return "<KEEP>";
    case Marker::kDrop: return "<DROP>";
  }
  return "";
}

// Names used in JSON ("NEED", "DONE", ...).
inline constexpr std::string_view marker_name(Marker m) {
  switch (m) {
    case Marker::kPfx: return "PFX";
    case Marker::kSfx: return "SFX";
    case Marker::kNeed: return "NEED";
    case Marker::kDone: return "DONE";
    case Marker::kSelect: return "SELECT";
    case Marker::kMid: return "MID";
    case Marker::kKeep: return "KEEP";
    case Marker::kDrop: return "DROP";
  }
  return "";
}

inline constexpr std::array<Marker, 8> kAllMarkers = {
    Marker::kPfx,    Marker::kSfx, Marker::kNeed, Marker::kDone,
    Marker::kSelect, Marker::kMid, Marker::kKeep, Marker::kDrop};

inline std::optional<Marker> marker_from_name(std::string_view name) {
  for (Marker m : kAllMarkers) {
    if (marker_name(m) == name || marker_text(m) == name) return m;
  }
  return std::nullopt;
}

inline std::string chunk_open(std::size_t index) {
  return "<C_" + std::to_string(index) + ">";
}
inline std::string chunk_close(std::size_t index) {
  return "</C_" + std::to_string(index) + ">";
}

// <C_1>cc_1</C_1> ... <C_n>cc_n</C_n>, numbered by position in `chunks`.
inline std::string pack(const std::vector<std::string>& chunks) {
  std::string out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    out += chunk_open(i + 1);
    out += chunks[i];
    out += chunk_close(i + 1);
  }
  return out;
}

enum class Decision { kKeep, kDrop };

inline std::string_view decision_name(Decision d) {
  return d == Decision::kKeep ? "KEEP" : "DROP";
}

enum class RetrievalControl { kNeed, kDone };

inline std::string_view control_name(RetrievalControl r) {
  return r == RetrievalControl::kNeed ? "NEED" : "DONE";
}

struct PromptParts {
  std::string prefix;
  std::string suffix;
  std::vector<std::string> evidence;
  std::vector<Marker> markers;

  friend bool operator==(const PromptParts&, const PromptParts&) = default;
};

inline void validate(const PromptParts& parts) {
  bool has_need = false;
  for (Marker m : parts.markers) {
    if (m == Marker::kPfx || m == Marker::kSfx) {
      throw ContractViolation("PFX/SFX are implicit and cannot be markers");
    }
    if (m == Marker::kNeed) {
      if (has_need) throw ContractViolation("duplicate <NEED> marker");
      has_need = true;
    }
  }
  if (!parts.evidence.empty() && !has_need) {
    throw ContractViolation("evidence requires a <NEED> marker to anchor it");
  }
}

inline std::string render(const PromptParts& parts) {
  validate(parts);
  std::string out;
  out += marker_text(Marker::kPfx);
  out += parts.prefix;
  out += marker_text(Marker::kSfx);
  out += parts.suffix;
  for (Marker m : parts.markers) {
    out += marker_text(m);
    if (m == Marker::kNeed) out += pack(parts.evidence);
  }
  return out;
}

// Canonical prompt shapes.
namespace prompts {

// Context for the retrieval-control decision: ends right after the suffix.
inline PromptParts control(std::string prefix, std::string suffix) {
  return {std::move(prefix), std::move(suffix), {}, {}};
}

// In-file-only completion: <PFX>p<SFX>s<DONE><MID>
inline PromptParts no_retrieval(std::string prefix, std::string suffix) {
  return {std::move(prefix), std::move(suffix), {}, {Marker::kDone, Marker::kMid}};
}

// Completion with evidence: <PFX>p<SFX>s<NEED>Pack(E)<DONE><MID>
inline PromptParts with_evidence(std::string prefix, std::string suffix,
                                 std::vector<std::string> evidence) {
  return {std::move(prefix), std::move(suffix), std::move(evidence),
          {Marker::kNeed, Marker::kDone, Marker::kMid}};
}

// Selection head: <PFX>p<SFX>s<NEED>Pack(E)<SELECT>
inline PromptParts selection(std::string prefix, std::string suffix,
                             std::vector<std::string> candidates) {
  return {std::move(prefix), std::move(suffix), std::move(candidates),
          {Marker::kNeed, Marker::kSelect}};
}

}  // namespace prompts

}  // namespace chunkshapley
