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

#include "ctxscore/ngram.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <set>

#include "ctxscore/error.hpp"

namespace ctxscore {
namespace {

constexpr std::array<char, 8> kMagic = {'C', 'T', 'X', 'N', 'G', 'R', 'M', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw DataError("n-gram model: truncated file");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

NGramModel NGramModel::train(std::span<const std::vector<std::string>> corpus,
                             const NGramOptions& options) {
  if (options.order < 1) throw DataError("n-gram order must be at least 1");
  if (corpus.empty()) throw DataError("cannot train on an empty corpus");
  if (!(options.discount > 0.0 && options.discount < 1.0)) {
    throw DataError("discount must lie in (0, 1)");
  }
  if (!(options.cache_lambda >= 0.0 && options.cache_lambda <= 1.0)) {
    throw DataError("cache lambda must lie in [0, 1]");
  }

  NGramModel m;
  m.order_ = options.order;
  m.discount_ = options.discount;
  m.cache_lambda_ = options.cache_lambda;
  m.cache_mode_ = options.cache_mode;

  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& s : corpus) {
    for (const auto& t : s) ++freq[t];
  }
  auto mapped = [&](const std::string& t) -> std::string_view {
    return options.unk_singletons && freq[t] == 1 ? kUnk : std::string_view(t);
  };
  std::set<std::string> types{std::string(kUnk), std::string(kEos)};
  for (const auto& s : corpus) {
    for (const auto& t : s) types.emplace(mapped(t));
  }
  m.vocab_.assign(types.begin(), types.end());
  m.index_vocabulary();

  const auto n = static_cast<std::size_t>(m.order_);
  m.levels_.assign(n, {});
  std::vector<WordId> padded;
  for (const auto& s : corpus) {
    padded.assign(n - 1, m.bos_);
    for (const auto& t : s) padded.push_back(m.index_.at(std::string(mapped(t))));
    padded.push_back(m.id(kEos));
    for (std::size_t i = n - 1; i < padded.size(); ++i) {
      std::vector<WordId> history(padded.begin() + static_cast<std::ptrdiff_t>(i + 1 - n),
                                  padded.begin() + static_cast<std::ptrdiff_t>(i));
      auto& entry = m.levels_[n - 1][history];
      ++entry.counts[padded[i]];
      ++entry.total;
    }
  }
  // continuation counts: one per distinct left extension one level up
  for (std::size_t k = n - 1; k >= 1; --k) {
    auto& lower = m.levels_[k - 1];
    for (const auto& [history, entry] : m.levels_[k]) {
      const std::vector<WordId> shorter(history.begin() + 1, history.end());
      auto& target = lower[shorter];
      for (const auto& [w, c] : entry.counts) {
        ++target.counts[w];
        ++target.total;
      }
    }
  }
  return m;
}

void NGramModel::index_vocabulary() {
  index_.clear();
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    index_.emplace(vocab_[i], static_cast<WordId>(i));
  }
  unk_ = index_.at(std::string(kUnk));
  bos_ = static_cast<WordId>(vocab_.size());
}

void NGramModel::set_cache_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("cache lambda must lie in [0, 1]");
  cache_lambda_ = lambda;
  cache_mode_ = lambda == 1.0 ? CacheMode::Off : CacheMode::UniformDoc;
}

NGramModel::WordId NGramModel::id(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? unk_ : it->second;
}

bool NGramModel::in_vocabulary(std::string_view word) const {
  return index_.contains(std::string(word));
}

std::vector<NGramModel::WordId> NGramModel::history_ids(
    std::span<const std::string> context) const {
  const auto want = static_cast<std::size_t>(order_ - 1);
  std::vector<WordId> h(want, bos_);
  const std::size_t take = std::min(want, context.size());
  for (std::size_t i = 0; i < take; ++i) {
    h[want - take + i] = id(context[context.size() - take + i]);
  }
  return h;
}

double NGramModel::level_probability(int level, WordId w,
                                     std::span<const WordId> history) const {
  if (level == 0) return 1.0 / static_cast<double>(vocab_.size());
  const double lower = level_probability(level - 1, w, history.subspan(1));
  const auto& table = levels_[static_cast<std::size_t>(level - 1)];
  const auto it = table.find(std::vector<WordId>(history.begin(), history.end()));
  if (it == table.end() || it->second.total == 0) return lower;
  const ContextEntry& e = it->second;
  const auto cit = e.counts.find(w);
  const double c = cit == e.counts.end() ? 0.0 : static_cast<double>(cit->second);
  const double total = static_cast<double>(e.total);
  const double types = static_cast<double>(e.counts.size());
  return std::max(c - discount_, 0.0) / total + discount_ * types / total * lower;
}

double NGramModel::kn_probability(std::string_view word,
                                  std::span<const std::string> context) const {
  const auto h = history_ids(context);
  return level_probability(order_, id(word), h);
}

double NGramModel::probability(std::string_view word, std::span<const std::string> context,
                               std::span<const std::string> document) const {
  const double kn = kn_probability(word, context);
  if (cache_mode_ == CacheMode::Off) return kn;
  const WordId w = id(word);
  std::size_t hits = 0;
  for (const auto& t : document) hits += id(t) == w;
  const double cache = static_cast<double>(hits + 1) /
                       static_cast<double>(document.size() + vocab_.size());
  return cache_lambda_ * kn + (1.0 - cache_lambda_) * cache;
}

Surprisal NGramModel::surprisal(std::string_view word, std::span<const std::string> context,
                                std::span<const std::string> document, LogBase base) const {
  const double p = probability(word, context, document);
  // -log(1) is -0.0; keep the sign clean
  return {from_nats(p >= 1.0 ? 0.0 : -std::log(p), base), base};
}

void NGramModel::save(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kFormatVersion);
  put<std::int32_t>(out, order_);
  put<double>(out, discount_);
  put<double>(out, cache_lambda_);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(cache_mode_));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(vocab_.size()));
  for (const auto& w : vocab_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(w.size()));
    out.write(w.data(), static_cast<std::streamsize>(w.size()));
  }
  for (const auto& level : levels_) {
    put<std::uint64_t>(out, level.size());
    for (const auto& [history, entry] : level) {
      for (WordId h : history) put<std::uint32_t>(out, h);
      put<std::uint64_t>(out, entry.counts.size());
      for (const auto& [w, c] : entry.counts) {
        put<std::uint32_t>(out, w);
        put<std::uint64_t>(out, c);
      }
    }
  }
  if (!out) throw DataError("n-gram model: write failed");
}

NGramModel NGramModel::load(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError("n-gram model: bad magic (not a model file)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw DataError("n-gram model: unsupported format version " + std::to_string(version));
  }
  NGramModel m;
  m.order_ = get<std::int32_t>(in);
  m.discount_ = get<double>(in);
  m.cache_lambda_ = get<double>(in);
  const auto mode = get<std::uint8_t>(in);
  if (m.order_ < 1 || m.order_ > 64 || mode > 1) throw DataError("n-gram model: corrupt header");
  m.cache_mode_ = static_cast<CacheMode>(mode);
  const auto vsize = get<std::uint32_t>(in);
  m.vocab_.reserve(vsize);
  for (std::uint32_t i = 0; i < vsize; ++i) {
    const auto len = get<std::uint32_t>(in);
    std::string w(len, '\0');
    if (!in.read(w.data(), len)) throw DataError("n-gram model: truncated vocabulary");
    m.vocab_.push_back(std::move(w));
  }
  if (!std::is_sorted(m.vocab_.begin(), m.vocab_.end()) ||
      !std::binary_search(m.vocab_.begin(), m.vocab_.end(), std::string(kUnk))) {
    throw DataError("n-gram model: corrupt vocabulary block");
  }
  m.index_vocabulary();
  m.levels_.assign(static_cast<std::size_t>(m.order_), {});
  for (int k = 1; k <= m.order_; ++k) {
    auto& level = m.levels_[static_cast<std::size_t>(k - 1)];
    const auto contexts = get<std::uint64_t>(in);
    for (std::uint64_t c = 0; c < contexts; ++c) {
      std::vector<WordId> history(static_cast<std::size_t>(k - 1));
      for (auto& h : history) {
        h = get<std::uint32_t>(in);
        if (h > m.bos_) throw DataError("n-gram model: word id out of range");
      }
      auto& entry = level[history];
      const auto words = get<std::uint64_t>(in);
      for (std::uint64_t i = 0; i < words; ++i) {
        const auto w = get<std::uint32_t>(in);
        const auto count = get<std::uint64_t>(in);
        if (w >= m.bos_) throw DataError("n-gram model: word id out of range");
        entry.counts[w] = count;
        entry.total += count;
      }
    }
  }
  return m;
}

std::vector<std::vector<std::string>> read_corpus(std::istream& in,
                                                  const TokenizerPolicy& policy) {
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line, policy);
    if (!tokens.empty()) out.push_back(std::move(tokens));
  }
  return out;
}

ScoreRecord score_stimulus_ngram(const NGramModel& model, const StimulusInstance& instance,
                                 const TokenizerPolicy& policy, LogBase base) {
  ScoreRecord rec;
  rec.frame_id = instance.frame_id;
  rec.predicate = instance.predicate;
  rec.length = instance.length;

  std::vector<std::string> context = tokenize(instance.context_text, policy);
  std::vector<std::string> document = context;
  const auto target = tokenize(instance.critical_word, policy);
  if (target.empty()) {
    rec.excluded = true;
    rec.detail = "critical word has no tokens";
    return rec;
  }
  double nats = 0.0;
  int unknown = 0;
  for (const auto& t : target) {
    nats += model.surprisal(t, context, document).value;
    unknown += !model.in_vocabulary(t);
    context.push_back(t);
    document.push_back(t);
  }
  rec.metric = from_nats(nats, base);
  rec.detail = "tokens=" + std::to_string(target.size()) + ";unk=" + std::to_string(unknown);
  return rec;
}

}  // namespace ctxscore
