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

#include <json.hpp>

#include "ctxscore/bridge.hpp"
#include "ctxscore/stats.hpp"
#include "ctxscore/stimulus.hpp"
#include "ctxscore/tokenize.hpp"
#include "ctxscore/types.hpp"

namespace ctxscore {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kReportSchema = "ctxscore.effect-report/1";
inline constexpr std::string_view kRunSchema = "ctxscore.score-run/1";
inline constexpr std::string_view kSummarySchema = "ctxscore.summary/1";

// --- scoring -------------------------------------------------------------

/// One scoring backend. Written on the command line as
/// `[name=]kind:location`, e.g. `ngram:model.bin`, `vec=vectors:w.vec`,
/// `gpt=bridge:pipe:python host.py --stdio`.
struct BackendSpec {
  enum class Kind { NGram, Vectors, Bridge };
  Kind kind = Kind::NGram;
  std::string name;
  std::string location;  // model file, vector file, or endpoint
  TokenizerPolicy tokenizer;
  AggregationPolicy aggregation = AggregationPolicy::SumTokens;
  std::optional<double> cache_lambda;  // n-gram override
  bool strict = false;                 // vector loading

  static BackendSpec parse(std::string_view text);
  nlohmann::ordered_json to_json() const;
};

std::string_view to_string(BackendSpec::Kind kind);

struct ScoringOptions {
  LogBase base = LogBase::Natural;
  ExpandOptions expand;
  int workers = 4;
  SessionOptions session;
};

/// A loaded backend. Implementations are safe to call concurrently except
/// where noted by `concurrent()`.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual const std::string& name() const = 0;
  /// Extra metadata for the run sidecar (model name, vocabulary size, ...).
  virtual nlohmann::ordered_json describe() const = 0;
  /// Scores every instance; the result is aligned with `instances`.
  virtual std::vector<ScoreRecord> score_all(std::span<const StimulusInstance> instances,
                                             const ScoringOptions& options) = 0;
};

/// Loads or connects; failures name the backend and are BackendError or
/// DataError.
std::unique_ptr<Scorer> make_scorer(const BackendSpec& spec, const ScoringOptions& options);

/// Rows ordered by frame, then condition, then backend in the order given.
std::vector<ScoreRecord> run_scoring(std::span<const StoryFrame> frames,
                                     std::span<const std::unique_ptr<Scorer>> scorers,
                                     const ScoringOptions& options);

void write_score_table(std::ostream& out, std::span<const ScoreRecord> rows);
std::vector<ScoreRecord> read_score_table(std::istream& in);

/// Run metadata: configuration, its hash and the backends' descriptions.
/// Contains no timestamps or absolute machine state, so identical runs
/// produce identical bytes.
nlohmann::ordered_json run_sidecar(const nlohmann::ordered_json& config,
                                   std::span<const std::unique_ptr<Scorer>> scorers,
                                   std::size_t rows);

std::string fnv1a_hex(std::string_view bytes);

// --- analysis ------------------------------------------------------------

enum class FdrFamily { All, PerBackend };
enum class ExclusionPolicy { PerBackend, Listwise };

std::string_view to_string(FdrMethod m);
std::string_view to_string(FdrFamily f);
std::string_view to_string(ExclusionPolicy e);
FdrMethod parse_fdr_method(std::string_view s);
FdrFamily parse_fdr_family(std::string_view s);
ExclusionPolicy parse_exclusion(std::string_view s);

struct AnalysisOptions {
  FdrMethod fdr = FdrMethod::BY;
  FdrFamily family = FdrFamily::All;
  ExclusionPolicy exclusion = ExclusionPolicy::PerBackend;
};

struct ReductionResult {
  TestResult lrt;
  bool singular = false;
  double null_log_likelihood = 0.0;
  double alt_log_likelihood = 0.0;
  double intercept_variance = 0.0;
  double residual_variance = 0.0;
  std::size_t frames = 0;
};

struct BackendEffects {
  std::string backend;
  std::size_t rows = 0;
  std::size_t analyzed = 0;
  std::size_t excluded = 0;
  TestResult baseline;  // sentence cells, canonical minus noncanonical
  TestResult reversal;  // full cells, canonical minus noncanonical
  ReductionResult reduction;
  std::optional<TestResult> cross_check;  // difference of differences
  std::size_t complete_frames = 0;
};

struct EffectReport {
  FdrMethod fdr = FdrMethod::BY;
  FdrFamily family = FdrFamily::All;
  ExclusionPolicy exclusion = ExclusionPolicy::PerBackend;
  std::vector<BackendEffects> backends;

  nlohmann::ordered_json to_json() const;
  static EffectReport from_json(const nlohmann::json& j);
};

/// Baseline, reversal and reduction tests per backend, FDR-adjusted over the
/// declared family. The difference-of-differences cross-check is reported
/// unadjusted beside the reduction test.
EffectReport analyze(std::span<const ScoreRecord> rows, const AnalysisOptions& options = {});

// --- summaries -----------------------------------------------------------

struct ConditionSummary {
  std::string backend;
  PredicateType predicate = PredicateType::Canonical;
  StimulusLength length = StimulusLength::FullLength;
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> sd;    // undefined below two observations
  std::optional<double> ci95;  // t-based half-width
};

/// One entry per backend and condition, in first-seen backend order.
std::vector<ConditionSummary> summarize(std::span<const ScoreRecord> rows);
void write_summary_csv(std::ostream& out, std::span<const ConditionSummary> summary);
nlohmann::ordered_json summary_to_json(std::span<const ConditionSummary> summary);

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);

}  // namespace ctxscore
