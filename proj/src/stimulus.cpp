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

#include "ctxscore/stimulus.hpp"

#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "ctxscore/error.hpp"
#include "ctxscore/tokenize.hpp"

namespace ctxscore {

std::string_view to_string(PredicateType p) {
  return p == PredicateType::Canonical ? "canonical" : "noncanonical";
}

std::string_view to_string(StimulusLength l) {
  return l == StimulusLength::FullLength ? "full" : "sentence";
}

PredicateType parse_predicate(std::string_view s) {
  if (s == "canonical") return PredicateType::Canonical;
  if (s == "noncanonical") return PredicateType::Noncanonical;
  throw DataError("unknown predicate type '" + std::string(s) + "'");
}

StimulusLength parse_length(std::string_view s) {
  if (s == "full") return StimulusLength::FullLength;
  if (s == "sentence") return StimulusLength::CriticalSentence;
  throw DataError("unknown stimulus length '" + std::string(s) + "'");
}

std::string_view to_string(LogBase b) {
  return b == LogBase::Natural ? "e" : "2";
}

LogBase parse_log_base(std::string_view s) {
  if (s == "e" || s == "natural" || s == "nats") return LogBase::Natural;
  if (s == "2" || s == "bits") return LogBase::Base2;
  throw UsageError("unknown log base '" + std::string(s) + "'");
}

namespace {

bool has_whitespace(std::string_view s) {
  return s.find_first_of(" \t\r\n\f\v") != std::string_view::npos;
}

const std::unordered_set<std::string> kKnownKeys = {
    "frame_id", "context",   "target_prefix", "canonical",
    "noncanonical", "post_text", "multiword"};

std::string required_string(const nlohmann::json& obj, const char* key,
                            const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw DataError(where + ": missing required field '" + key + "'");
  }
  if (!it->is_string()) {
    throw DataError(where + ": field '" + key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

void validate_frame(const StoryFrame& f, const std::string& where) {
  const std::string at = where.empty() ? "frame '" + f.frame_id + "'" : where;
  if (f.frame_id.empty()) throw DataError(at + ": empty frame_id");
  if (f.target_prefix.empty()) throw DataError(at + ": empty target_prefix");
  if (f.canonical_word.empty()) throw DataError(at + ": empty critical word 'canonical'");
  if (f.noncanonical_word.empty()) {
    throw DataError(at + ": empty critical word 'noncanonical'");
  }
  if (f.canonical_word == f.noncanonical_word) {
    throw DataError(at + ": canonical and noncanonical words are identical");
  }
  if (!f.multiword &&
      (has_whitespace(f.canonical_word) || has_whitespace(f.noncanonical_word))) {
    throw DataError(at + ": critical word contains whitespace but multiword is not set");
  }
}

std::vector<StoryFrame> parse_frames(std::istream& in, const FrameFormat& format) {
  std::vector<StoryFrame> frames;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++record;
    const std::string where =
        "record " + std::to_string(record) + " (line " + std::to_string(line_no) + ")";

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
    if (format.strict) {
      for (const auto& [key, value] : obj.items()) {
        if (!kKnownKeys.contains(key)) {
          throw DataError(where + ": unknown key '" + key + "'");
        }
      }
    }

    StoryFrame f;
    f.frame_id = required_string(obj, "frame_id", where);
    f.context = required_string(obj, "context", where);
    f.target_prefix = required_string(obj, "target_prefix", where);
    f.canonical_word = required_string(obj, "canonical", where);
    f.noncanonical_word = required_string(obj, "noncanonical", where);
    if (const auto it = obj.find("post_text"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) throw DataError(where + ": field 'post_text' must be a string");
      f.post_text = it->get<std::string>();
    }
    if (const auto it = obj.find("multiword"); it != obj.end()) {
      if (!it->is_boolean()) throw DataError(where + ": field 'multiword' must be a boolean");
      f.multiword = it->get<bool>();
    }
    validate_frame(f, where);
    if (!seen.insert(f.frame_id).second) {
      throw DataError(where + ": duplicate frame_id '" + f.frame_id + "'");
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

void serialize_frames(std::ostream& out, std::span<const StoryFrame> frames) {
  for (const auto& f : frames) {
    nlohmann::ordered_json obj;
    obj["frame_id"] = f.frame_id;
    obj["context"] = f.context;
    obj["target_prefix"] = f.target_prefix;
    obj["canonical"] = f.canonical_word;
    obj["noncanonical"] = f.noncanonical_word;
    if (f.post_text) obj["post_text"] = *f.post_text;
    if (f.multiword) obj["multiword"] = true;
    out << obj.dump() << '\n';
  }
}

std::vector<StimulusInstance> expand(std::span<const StoryFrame> frames,
                                     const ExpandOptions& options) {
  std::vector<StimulusInstance> out;
  out.reserve(frames.size() * kConditions.size());
  for (const auto& f : frames) {
    validate_frame(f);
    std::string body = options.strip_context_final_punctuation
                           ? strip_trailing_punctuation(f.context)
                           : f.context;
    const std::string full =
        body.empty() ? f.target_prefix : body + " " + f.target_prefix;
    for (const auto& cond : kConditions) {
      StimulusInstance inst;
      inst.frame_id = f.frame_id;
      inst.predicate = cond.predicate;
      inst.length = cond.length;
      inst.context_text =
          cond.length == StimulusLength::FullLength ? full : f.target_prefix;
      inst.critical_word = f.word(cond.predicate);
      inst.multiword = f.multiword;
      out.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace ctxscore
