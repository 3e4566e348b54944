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

#include <string>
#include <string_view>
#include <vector>

namespace ctxscore {

struct TokenizerPolicy {
  bool drop_punctuation = true;
  bool lowercase = false;
};

/// Split UTF-8 text into word and punctuation tokens.
///
/// A word is a maximal run of letters, digits and other non-punctuation
/// code points. An apostrophe or hyphen joins two word characters
/// ("pinda's", "e-mail"); a comma or period joins two digits ("3,5").
/// Any other run of punctuation becomes a single token, which is dropped
/// when the policy says so. Whitespace (including Unicode spaces) only
/// separates.
std::vector<std::string> tokenize(std::string_view text,
                                  const TokenizerPolicy& policy = {});

/// Lower-case ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic letters;
/// everything else passes through byte-for-byte.
std::string fold_case(std::string_view text);

bool is_punctuation_token(std::string_view token);

/// Remove trailing whitespace and punctuation code points.
std::string strip_trailing_punctuation(std::string_view text);

}  // namespace ctxscore
