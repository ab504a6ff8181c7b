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

// JSON-over-HTTP generator protocol, version 1.
//
//   POST /v1/score           {prefix, suffix, evidence[], markers[], target}
//                            -> {token_logprobs[]}
//   POST /v1/generate        {..., max_new_tokens, stop[]} -> {text}
//   POST /v1/control-logits  {...} -> {control_logits: {need, done}}
//   POST /v1/select          {..., k} -> {text}
//
// Every request carries "version": 1. `markers` holds marker names
// ("NEED", "DONE", "SELECT", "MID") in emission order. Error statuses:
// 400 contract, 413 sizing, 422 backend data, 501 capability.

#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "chunkshapley/errors.hpp"
#include "chunkshapley/prompt.hpp"

namespace chunkshapley::protocol {

inline constexpr int kVersion = 1;

inline constexpr const char* kScorePath = "/v1/score";
inline constexpr const char* kGeneratePath = "/v1/generate";
inline constexpr const char* kControlPath = "/v1/control-logits";
inline constexpr const char* kSelectPath = "/v1/select";

inline nlohmann::json encode_parts(const PromptParts& parts) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["prefix"] = parts.prefix;
  j["suffix"] = parts.suffix;
  j["evidence"] = parts.evidence;
  auto markers = nlohmann::json::array();
  for (Marker m : parts.markers) markers.push_back(std::string(marker_name(m)));
  j["markers"] = markers;
  return j;
}

inline PromptParts decode_parts(const nlohmann::json& j) {
  try {
    if (j.value("version", kVersion) != kVersion) {
      throw ContractViolation("unsupported protocol version " +
                              j.at("version").dump());
    }
    PromptParts parts;
    parts.prefix = j.value("prefix", "");
    parts.suffix = j.value("suffix", "");
    parts.evidence = j.value("evidence", std::vector<std::string>{});
    for (const auto& name : j.value("markers", std::vector<std::string>{})) {
      const auto m = marker_from_name(name);
      if (!m) throw ContractViolation("unknown marker '" + name + "'");
      parts.markers.push_back(*m);
    }
    validate(parts);
    return parts;
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("malformed protocol request: ") + e.what());
  }
}

}  // namespace chunkshapley::protocol
