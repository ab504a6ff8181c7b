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

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace chunkshapley {

// Base of every error raised by the library. Each subclass maps to one
// failure category that callers (mostly the CLI) translate to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Input too large for an exponential enumeration, or a backend refused the
// request length even after truncation. Not retryable.
class SizingError : public Error {
 public:
  using Error::Error;
};

// Backend unreachable or timed out. Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Backend answered, but with something unusable (non-finite logprobs,
// missing fields, no script for a prompt on the stub).
class BackendDataError : public Error {
 public:
  using Error::Error;
};

// Backend cannot provide the requested quantity (e.g. control-token logits).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Malformed user-supplied input (JSON, JSONL, config).
class InputFormatError : public Error {
 public:
  using Error::Error;
};

// Failure of supporting infrastructure that is not a property of the data,
// e.g. the external syntax checker could not be executed.
class InfrastructureError : public Error {
 public:
  using Error::Error;
};

}  // namespace chunkshapley
