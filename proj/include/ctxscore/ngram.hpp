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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxscore/stimulus.hpp"
#include "ctxscore/tokenize.hpp"
#include "ctxscore/types.hpp"

namespace ctxscore {

inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";

enum class CacheMode : std::uint8_t { Off = 0, UniformDoc = 1 };

struct NGramOptions {
  int order = 4;
  double discount = 0.75;
  double cache_lambda = 0.9;  // weight on the static model
  CacheMode cache_mode = CacheMode::UniformDoc;
  bool unk_singletons = true;
};

struct Surprisal {
  double value = 0.0;  // in `base`
  LogBase base = LogBase::Natural;

  double in(LogBase target) const {
    if (target == base) return value;
    return target == LogBase::Natural ? value * std::log(2.0) : value / std::log(2.0);
  }
};

/// Interpolated Kneser-Ney model with a single absolute discount, mixed with
/// an add-one document cache:
///
///   p(w | h, doc) = lambda * p_KN(w | h) + (1 - lambda) * (c_doc(w) + 1) / (|doc| + |V|)
///
/// The top level uses raw counts, lower levels continuation counts, and the
/// recursion bottoms out in the uniform distribution over V. V holds every
/// training type plus <unk> and </s>; <s> only ever appears as history.
class NGramModel {
 public:
  using WordId = std::uint32_t;

  static NGramModel train(std::span<const std::vector<std::string>> corpus,
                          const NGramOptions& options = {});

  /// Mixture probability of `word` after `context`; the cache counts `document`.
  double probability(std::string_view word, std::span<const std::string> context,
                     std::span<const std::string> document) const;
  /// The static Kneser-Ney component alone.
  double kn_probability(std::string_view word, std::span<const std::string> context) const;

  Surprisal surprisal(std::string_view word, std::span<const std::string> context,
                      std::span<const std::string> document,
                      LogBase base = LogBase::Natural) const;

  int order() const { return order_; }
  double discount() const { return discount_; }
  double cache_lambda() const { return cache_lambda_; }
  CacheMode cache_mode() const { return cache_mode_; }
  /// Reweights the document cache without retraining; 1 disables it.
  void set_cache_lambda(double lambda);
  /// Predictable vocabulary, sorted; includes <unk> and </s>.
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  WordId id(std::string_view word) const;
  bool in_vocabulary(std::string_view word) const;

  void save(std::ostream& out) const;
  static NGramModel load(std::istream& in);

 private:
  struct ContextEntry {
    std::uint64_t total = 0;
    std::map<WordId, std::uint64_t> counts;  // size() = distinct continuations
  };
  using Level = std::map<std::vector<WordId>, ContextEntry>;

  NGramModel() = default;
  void index_vocabulary();
  double level_probability(int level, WordId w, std::span<const WordId> history) const;
  std::vector<WordId> history_ids(std::span<const std::string> context) const;

  int order_ = 0;
  double discount_ = 0.75;
  double cache_lambda_ = 1.0;
  CacheMode cache_mode_ = CacheMode::Off;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, WordId> index_;
  WordId unk_ = 0;
  WordId bos_ = 0;
  std::vector<Level> levels_;  // levels_[k-1] holds k-grams keyed by their history
};

/// Split a plain-text corpus (one sentence per line) into token lists.
std::vector<std::vector<std::string>> read_corpus(std::istream& in,
                                                  const TokenizerPolicy& policy = {});

/// Surprisal of the critical word after the tokenized context, with the
/// whole context as cache document. Multi-token words are scored token by
/// token (teacher forcing) and summed.
ScoreRecord score_stimulus_ngram(const NGramModel& model, const StimulusInstance& instance,
                                 const TokenizerPolicy& policy = {},
                                 LogBase base = LogBase::Natural);

}  // namespace ctxscore
