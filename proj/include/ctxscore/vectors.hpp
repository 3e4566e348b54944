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

#include <algorithm>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxscore/error.hpp"
#include "ctxscore/stimulus.hpp"
#include "ctxscore/tokenize.hpp"
#include "ctxscore/types.hpp"

namespace ctxscore {

/// 1 - cos(u, v), clamped to [0, 2].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_distance(const Eigen::MatrixBase<DerivedA>& u,
                                          const Eigen::MatrixBase<DerivedB>& v) {
  using Scalar = typename DerivedA::Scalar;
  if (u.size() != v.size()) {
    throw DataError("cosine_distance: dimension mismatch (" +
                    std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
  }
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (!(nu > Scalar(0)) || !(nv > Scalar(0))) {
    throw DataError("cosine_distance: zero-norm vector");
  }
  // Normalising first keeps the dot product in [-1, 1] up to rounding.
  const Scalar cos = (u / nu).dot(v.template cast<Scalar>() / nv);
  return std::clamp(Scalar(1) - cos, Scalar(0), Scalar(2));
}

/// Pairwise sum of a set of equally sized vectors, accumulated in `Acc`.
template <typename Acc, typename Scalar>
VecX<Acc> pairwise_sum(std::span<const VecX<Scalar>* const> items, Eigen::Index dim) {
  if (items.empty()) return VecX<Acc>::Zero(dim);
  if (items.size() == 1) return items.front()->template cast<Acc>();
  const std::size_t half = items.size() / 2;
  return pairwise_sum<Acc, Scalar>(items.first(half), dim) +
         pairwise_sum<Acc, Scalar>(items.subspan(half), dim);
}

/// Word -> vector table of fixed dimension. Insertion order is kept so a
/// store can be written back out in the order it was read.
class VectorStore {
 public:
  VectorStore(Eigen::Index dimension, std::string source = {});

  Eigen::Index dimension() const { return dimension_; }
  std::size_t size() const { return words_.size(); }
  const std::string& source() const { return source_; }
  const std::vector<std::string>& words() const { return words_; }

  /// Returns false (and keeps the existing entry) on a duplicate word.
  bool insert(std::string word, VecXd vec);

  const VecXd* find(std::string_view word) const;

  struct Lookup {
    const VecXd* vector;
    std::string key;
    bool folded;  // found only after lower-casing
  };
  /// Exact match first, then the lower-cased form.
  std::optional<Lookup> lookup(std::string_view word) const;

 private:
  Eigen::Index dimension_;
  std::string source_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, VecXd> table_;
};

struct VecLoadOptions {
  bool strict = false;  // duplicate words are an error instead of keep-first
  std::string source;
  std::function<void(const std::string&)> warn;
};

/// Text format: "V D" header, then V lines "word c1 .. cD".
VectorStore load_vectors(std::istream& in, const VecLoadOptions& options = {});
void save_vectors(std::ostream& out, const VectorStore& store, int precision = 17);

struct ContextMean {
  VecXd mean;
  int used = 0;
  int ignored = 0;
};

/// Unweighted mean of the in-vocabulary token vectors (repeats count),
/// pairwise-summed in long double.
ContextMean context_mean(const VectorStore& store, std::span<const std::string> tokens);

struct CosineScore {
  double value = 0.0;
  int context_tokens_used = 0;
  int context_tokens_ignored = 0;
};

/// Resolve a critical word: exact/lower-case, then for multiword entries the
/// underscore-joined and space-joined forms.
std::optional<VectorStore::Lookup> lookup_critical_word(const VectorStore& store,
                                                        std::string_view word);

ScoreRecord score_stimulus_vectors(const VectorStore& store,
                                   const StimulusInstance& instance,
                                   const TokenizerPolicy& policy = {});

}  // namespace ctxscore
