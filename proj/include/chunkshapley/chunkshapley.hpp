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

// Umbrella header.

#pragma once

#include "chunkshapley/corpus.hpp"
#include "chunkshapley/errors.hpp"
#include "chunkshapley/game.hpp"
#include "chunkshapley/generator.hpp"
#include "chunkshapley/inference.hpp"
#include "chunkshapley/jsonl.hpp"
#include "chunkshapley/labeler.hpp"
#include "chunkshapley/metrics.hpp"
#include "chunkshapley/parallel.hpp"
#include "chunkshapley/prompt.hpp"
#include "chunkshapley/protocol.hpp"
#include "chunkshapley/remote.hpp"
#include "chunkshapley/retrieval.hpp"
#include "chunkshapley/stub_generator.hpp"
#include "chunkshapley/text.hpp"
