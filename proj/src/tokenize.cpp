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

#include "ctxscore/tokenize.hpp"

#include <cstdint>

namespace ctxscore {
namespace {

struct CodePoint {
  char32_t value;
  std::size_t offset;
  std::size_t length;
};

// Invalid bytes decode as themselves (length 1) so nothing is ever lost.
std::vector<CodePoint> decode(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if (b0 >= 0xC0 && b0 < 0xE0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if (b0 >= 0xE0 && b0 < 0xF0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if (b0 >= 0xF0 && b0 < 0xF8) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (b & 0x3F);
      }
    }
    if (!ok) {
      len = 1;
      cp = b0;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v' || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200B) || c == 0x2028 || c == 0x2029 ||
         c == 0x202F || c == 0x205F || c == 0x3000 || c == 0xFEFF;
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
           (c >= 0x5B && c <= 0x60 && c != '_') || (c >= 0x7B && c <= 0x7E);
  }
  return c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 ||
         c == 0xBB || c == 0xBF || (c >= 0x2010 && c <= 0x2027) ||
         (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003) ||
         (c >= 0x3008 && c <= 0x3011) || (c >= 0xFF01 && c <= 0xFF0F) ||
         (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
         (c >= 0xFF5B && c <= 0xFF65);
}

bool is_word(char32_t c) { return !is_space(c) && !is_punct(c); }
bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }
bool is_apostrophe(char32_t c) { return c == '\'' || c == 0x2019; }
bool is_hyphen(char32_t c) { return c == '-' || c == 0x2010 || c == 0x2011; }

char32_t lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 0x20;
  if (c < 0xC0) return c;
  if (c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c >= 0x100 && c <= 0x137) return c | 1u;
  if (c >= 0x139 && c <= 0x148) return (c & 1u) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return c | 1u;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E) return (c & 1u) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  return c;
}

}  // namespace

std::string fold_case(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const auto& cp : decode(text)) {
    const char32_t low = lower(cp.value);
    if (low == cp.value) {
      out.append(text.substr(cp.offset, cp.length));
    } else {
      encode(low, out);
    }
  }
  return out;
}

bool is_punctuation_token(std::string_view token) {
  if (token.empty()) return false;
  for (const auto& cp : decode(token)) {
    if (!is_punct(cp.value)) return false;
  }
  return true;
}

std::string strip_trailing_punctuation(std::string_view text) {
  const auto cps = decode(text);
  std::size_t end = text.size();
  for (auto it = cps.rbegin(); it != cps.rend(); ++it) {
    if (!is_space(it->value) && !is_punct(it->value)) break;
    end = it->offset;
  }
  return std::string(text.substr(0, end));
}

std::vector<std::string> tokenize(std::string_view text,
                                  const TokenizerPolicy& policy) {
  enum class Kind { None, Word, Punct };
  const auto cps = decode(text);
  std::vector<std::string> out;
  Kind kind = Kind::None;
  std::size_t start = 0;

  auto flush = [&](std::size_t end) {
    if (kind == Kind::None) return;
    if (kind == Kind::Word || !policy.drop_punctuation) {
      std::string tok(text.substr(start, end - start));
      out.push_back(policy.lowercase ? fold_case(tok) : std::move(tok));
    }
    kind = Kind::None;
  };

  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i].value;
    const std::size_t off = cps[i].offset;
    if (is_space(c)) {
      flush(off);
      continue;
    }
    if (is_word(c)) {
      if (kind == Kind::Punct) flush(off);
      if (kind == Kind::None) {
        kind = Kind::Word;
        start = off;
      }
      continue;
    }
    // punctuation: may glue two word characters together
    if (kind == Kind::Word && i + 1 < cps.size()) {
      const char32_t prev = cps[i - 1].value;
      const char32_t next = cps[i + 1].value;
      const bool joins_words =
          (is_apostrophe(c) || is_hyphen(c)) && is_word(prev) && is_word(next);
      const bool joins_digits =
          (c == ',' || c == '.') && is_digit(prev) && is_digit(next);
      if (joins_words || joins_digits) continue;
    }
    if (kind == Kind::Word) flush(off);
    if (kind == Kind::None) {
      kind = Kind::Punct;
      start = off;
    }
  }
  flush(text.size());
  return out;
}

}  // namespace ctxscore
