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

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxscore/types.hpp"

namespace ctxscore {

/// One story with its two possible endings.
struct StoryFrame {
  std::string frame_id;
  std::string context;        // story body before the final sentence
  std::string target_prefix;  // final sentence up to the critical word
  std::string canonical_word;
  std::string noncanonical_word;
  std::optional<std::string> post_text;  // carried through, never scored
  bool multiword = false;

  const std::string& word(PredicateType p) const {
    return p == PredicateType::Canonical ? canonical_word : noncanonical_word;
  }
  friend bool operator==(const StoryFrame&, const StoryFrame&) = default;
};

/// JSON-lines frame files. In strict mode unknown keys are an error.
struct FrameFormat {
  bool strict = false;
};

std::vector<StoryFrame> parse_frames(std::istream& in,
                                     const FrameFormat& format = {});
void serialize_frames(std::ostream& out, std::span<const StoryFrame> frames);

/// Throws DataError if the frame breaks an invariant; `where` prefixes the
/// message.
void validate_frame(const StoryFrame& frame, const std::string& where = {});

/// What a backend sees for one cell of the design. Nothing after the
/// critical word is ever part of context_text.
struct StimulusInstance {
  std::string frame_id;
  PredicateType predicate = PredicateType::Canonical;
  StimulusLength length = StimulusLength::FullLength;
  std::string context_text;
  std::string critical_word;
  bool multiword = false;
};

struct ExpandOptions {
  // Drop trailing sentence punctuation of the story body before joining it
  // to the final-sentence prefix. Off keeps the text as authored.
  bool strip_context_final_punctuation = false;
};

/// Four instances per frame, in frame order and then kConditions order.
std::vector<StimulusInstance> expand(std::span<const StoryFrame> frames,
                                     const ExpandOptions& options = {});

}  // namespace ctxscore
