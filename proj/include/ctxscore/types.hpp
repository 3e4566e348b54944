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

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace ctxscore {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VecXd = VecX<double>;
using MatXd = MatX<double>;

enum class PredicateType { Canonical, Noncanonical };
enum class StimulusLength { FullLength, CriticalSentence };

/// The four cells of the 2x2 design, in canonical row order.
struct Condition {
  PredicateType predicate;
  StimulusLength length;
  friend bool operator==(const Condition&, const Condition&) = default;
};

inline constexpr std::array<Condition, 4> kConditions = {{
    {PredicateType::Canonical, StimulusLength::FullLength},
    {PredicateType::Canonical, StimulusLength::CriticalSentence},
    {PredicateType::Noncanonical, StimulusLength::FullLength},
    {PredicateType::Noncanonical, StimulusLength::CriticalSentence},
}};

inline int condition_index(PredicateType p, StimulusLength l) {
  return (p == PredicateType::Canonical ? 0 : 2) +
         (l == StimulusLength::FullLength ? 0 : 1);
}

std::string_view to_string(PredicateType p);
std::string_view to_string(StimulusLength l);
PredicateType parse_predicate(std::string_view s);
StimulusLength parse_length(std::string_view s);

enum class LogBase { Natural, Base2 };

std::string_view to_string(LogBase b);
LogBase parse_log_base(std::string_view s);

/// Rescale a natural-log quantity into the requested base.
inline double from_nats(double nats, LogBase base) {
  return base == LogBase::Natural ? nats : nats / std::log(2.0);
}

/// One dependent-variable row: a backend's score for one stimulus instance.
/// Excluded rows keep their place in the table and carry no metric.
struct ScoreRecord {
  std::string backend;
  std::string frame_id;
  PredicateType predicate = PredicateType::Canonical;
  StimulusLength length = StimulusLength::FullLength;
  std::optional<double> metric;
  bool excluded = false;
  std::string detail;
};

}  // namespace ctxscore
