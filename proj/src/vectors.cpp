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

#include "ctxscore/vectors.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace ctxscore {

VectorStore::VectorStore(Eigen::Index dimension, std::string source)
    : dimension_(dimension), source_(std::move(source)) {
  if (dimension <= 0) throw DataError("vector dimension must be positive");
}

bool VectorStore::insert(std::string word, VecXd vec) {
  if (vec.size() != dimension_) {
    throw DataError("vector for '" + word + "' has dimension " +
                    std::to_string(vec.size()) + ", expected " +
                    std::to_string(dimension_));
  }
  if (!vec.allFinite()) throw DataError("vector for '" + word + "' is not finite");
  if (table_.contains(word)) return false;
  words_.push_back(word);
  table_.emplace(std::move(word), std::move(vec));
  return true;
}

const VecXd* VectorStore::find(std::string_view word) const {
  const auto it = table_.find(std::string(word));
  return it == table_.end() ? nullptr : &it->second;
}

std::optional<VectorStore::Lookup> VectorStore::lookup(std::string_view word) const {
  if (const auto* v = find(word)) return Lookup{v, std::string(word), false};
  std::string low = fold_case(word);
  if (low != word) {
    if (const auto* v = find(low)) return Lookup{v, std::move(low), true};
  }
  return std::nullopt;
}

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

long long parse_count(std::string_view s, const char* what) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0) {
    throw DataError(std::string("line 1: invalid ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

VectorStore load_vectors(std::istream& in, const VecLoadOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("line 1: missing 'V D' header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_spaces(line);
  if (header.size() != 2) throw DataError("line 1: header must be 'V D'");
  const long long vocab = parse_count(header[0], "vocabulary count");
  const long long dim = parse_count(header[1], "dimension");
  if (dim == 0) throw DataError("line 1: dimension must be positive");

  VectorStore store(static_cast<Eigen::Index>(dim), options.source);
  long long rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto parts = split_spaces(line);
    if (parts.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (rows == vocab) {
      throw DataError(where + ": more rows than the declared " + std::to_string(vocab));
    }
    if (static_cast<long long>(parts.size()) != dim + 1) {
      throw DataError(where + ": expected " + std::to_string(dim) + " components, found " +
                      std::to_string(parts.size() - 1));
    }
    VecXd vec(dim);
    for (long long k = 0; k < dim; ++k) {
      const auto s = parts[static_cast<std::size_t>(k) + 1];
      double x = 0.0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
      if (ec != std::errc() || p != s.data() + s.size()) {
        throw DataError(where + ": non-numeric component '" + std::string(s) + "'");
      }
      if (!std::isfinite(x)) {
        throw DataError(where + ": non-finite component '" + std::string(s) + "'");
      }
      vec[k] = x;
    }
    ++rows;
    std::string word(parts[0]);
    if (!store.insert(word, std::move(vec))) {
      if (options.strict) throw DataError(where + ": duplicate word '" + word + "'");
      if (options.warn) options.warn(where + ": duplicate word '" + word + "' ignored");
    }
  }
  if (rows != vocab) {
    throw DataError("header declares " + std::to_string(vocab) + " words but body has " +
                    std::to_string(rows));
  }
  return store;
}

void save_vectors(std::ostream& out, const VectorStore& store, int precision) {
  out << store.size() << ' ' << store.dimension() << '\n';
  char buf[64];
  for (const auto& w : store.words()) {
    out << w;
    const VecXd& v = *store.find(w);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.*g", precision, v[k]);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

ContextMean context_mean(const VectorStore& store, std::span<const std::string> tokens) {
  std::vector<const VecXd*> hits;
  hits.reserve(tokens.size());
  ContextMean out;
  for (const auto& t : tokens) {
    if (auto hit = store.lookup(t)) {
      hits.push_back(hit->vector);
    } else {
      ++out.ignored;
    }
  }
  out.used = static_cast<int>(hits.size());
  if (hits.empty()) throw DataError("no in-vocabulary context");
  const VecX<long double> sum = pairwise_sum<long double, double>(
      std::span<const VecXd* const>(hits), store.dimension());
  out.mean = (sum / static_cast<long double>(hits.size())).cast<double>();
  return out;
}

std::optional<VectorStore::Lookup> lookup_critical_word(const VectorStore& store,
                                                        std::string_view word) {
  std::istringstream parts{std::string(word)};
  std::vector<std::string> pieces;
  for (std::string p; parts >> p;) pieces.push_back(p);
  if (pieces.size() < 2) return store.lookup(word);
  std::string underscored = pieces[0];
  std::string spaced = pieces[0];
  for (std::size_t i = 1; i < pieces.size(); ++i) {
    underscored += "_" + pieces[i];
    spaced += " " + pieces[i];
  }
  if (auto hit = store.lookup(underscored)) return hit;
  return store.lookup(spaced);
}

ScoreRecord score_stimulus_vectors(const VectorStore& store,
                                   const StimulusInstance& instance,
                                   const TokenizerPolicy& policy) {
  ScoreRecord rec;
  rec.frame_id = instance.frame_id;
  rec.predicate = instance.predicate;
  rec.length = instance.length;

  const auto target = lookup_critical_word(store, instance.critical_word);
  if (!target) {
    rec.excluded = true;
    rec.detail = "critical word out of vocabulary";
    return rec;
  }
  const auto tokens = tokenize(instance.context_text, policy);
  const ContextMean mean = context_mean(store, tokens);
  rec.metric = cosine_distance(*target->vector, mean.mean);
  rec.detail = "used=" + std::to_string(mean.used) +
               ";ignored=" + std::to_string(mean.ignored) +
               ";lookup=" + (target->folded ? "folded" : "exact");
  return rec;
}

}  // namespace ctxscore
