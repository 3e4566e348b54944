// Copyright 2026 The ctxscore Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctxscore/stimulus.hpp"
#include "ctxscore/vectors.hpp"

// Planted-effect generator for end-to-end checks.
//
// Each frame i owns a noun N, a canonical word C, a noncanonical word K and
// a few cue words. The critical sentence is "de N ___"; the story body is
// built from the cues and ends on one. At strength s > 0 the corpus pairs
// "de N C" at sentence start and "<cue> de N K" inside sentences, the body
// mentions K, and the vector store pulls C toward N and K toward the cue
// centroid. At s = 0 none of this is planted and C and K are generated by
// the same process, so the two predicate types are exchangeable.

namespace ctxscore {

inline constexpr double kDefaultSynthStrength = 1.0;

struct SynthParams {
  int frames = 60;
  double strength = kDefaultSynthStrength;
  std::uint64_t seed = 42;
  int vocab_size = 2000;  // pool of distinct content words
  int cues_per_frame = 3;
  int fillers = 150;
  int dimension = 50;
  int background_sentences = 600;
};

struct SynthOutput {
  std::vector<std::string> corpus;  // one sentence per line
  std::vector<StoryFrame> frames;
  VectorStore vectors{1};
};

/// Deterministic for a given parameter set, on every platform.
SynthOutput synthesize(const SynthParams& params);

void write_corpus(std::ostream& out, const std::vector<std::string>& corpus);

}  // namespace ctxscore
