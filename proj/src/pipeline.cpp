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

#include "ctxscore/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "ctxscore/error.hpp"
#include "ctxscore/ngram.hpp"
#include "ctxscore/vectors.hpp"

namespace ctxscore {

using ojson = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- backends ------------------------------------------------------------

std::string_view to_string(BackendSpec::Kind kind) {
  switch (kind) {
    case BackendSpec::Kind::NGram: return "ngram";
    case BackendSpec::Kind::Vectors: return "vectors";
    case BackendSpec::Kind::Bridge: return "bridge";
  }
  return "?";
}

BackendSpec BackendSpec::parse(std::string_view text) {
  BackendSpec spec;
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw UsageError("backend must look like [name=]kind:location, got '" + std::string(text) +
                     "'");
  }
  std::string_view head = text.substr(0, colon);
  spec.location = std::string(text.substr(colon + 1));
  if (const auto eq = head.find('='); eq != std::string_view::npos) {
    spec.name = std::string(head.substr(0, eq));
    head = head.substr(eq + 1);
  }
  if (head == "ngram") {
    spec.kind = Kind::NGram;
  } else if (head == "vectors" || head == "vec") {
    spec.kind = Kind::Vectors;
  } else if (head == "bridge") {
    spec.kind = Kind::Bridge;
  } else {
    throw UsageError("unknown backend kind '" + std::string(head) + "' (ngram|vectors|bridge)");
  }
  if (spec.location.empty()) throw UsageError("backend '" + std::string(text) + "' has no location");
  if (spec.name.empty()) spec.name = std::string(to_string(spec.kind));
  if (spec.name.find_first_of(",\"\n") != std::string::npos) {
    throw UsageError("backend name '" + spec.name + "' may not contain commas or quotes");
  }
  return spec;
}

ojson BackendSpec::to_json() const {
  ojson j;
  j["name"] = name;
  j["kind"] = to_string(kind);
  j["location"] = location;
  j["tokenizer"] = {{"drop_punctuation", tokenizer.drop_punctuation},
                    {"lowercase", tokenizer.lowercase}};
  if (kind == Kind::Bridge) {
    j["aggregation"] = aggregation == AggregationPolicy::SumTokens ? "sum" : "single";
  }
  if (cache_lambda) j["cache_lambda"] = *cache_lambda;
  return j;
}

namespace {

// Runs fn(i) for i in [0, n) on at most `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

ScoreRecord excluded_record(const StimulusInstance& inst, std::string detail) {
  ScoreRecord r;
  r.frame_id = inst.frame_id;
  r.predicate = inst.predicate;
  r.length = inst.length;
  r.excluded = true;
  r.detail = std::move(detail);
  return r;
}

class NGramScorer final : public Scorer {
 public:
  NGramScorer(const BackendSpec& spec, NGramModel model)
      : spec_(spec), model_(std::move(model)) {}
  const std::string& name() const override { return spec_.name; }
  ojson describe() const override {
    return {{"order", model_.order()},
            {"discount", model_.discount()},
            {"cache_lambda", model_.cache_mode() == CacheMode::Off ? 1.0 : model_.cache_lambda()},
            {"vocabulary", model_.vocabulary().size()}};
  }
  std::vector<ScoreRecord> score_all(std::span<const StimulusInstance> instances,
                                     const ScoringOptions& options) override {
    std::vector<ScoreRecord> out(instances.size());
    parallel_for(instances.size(), options.workers, [&](std::size_t i) {
      out[i] = score_stimulus_ngram(model_, instances[i], spec_.tokenizer, options.base);
    });
    return out;
  }

 private:
  BackendSpec spec_;
  NGramModel model_;
};

class VectorScorer final : public Scorer {
 public:
  VectorScorer(const BackendSpec& spec, VectorStore store)
      : spec_(spec), store_(std::move(store)) {}
  const std::string& name() const override { return spec_.name; }
  ojson describe() const override {
    return {{"dimension", store_.dimension()}, {"words", store_.size()}};
  }
  std::vector<ScoreRecord> score_all(std::span<const StimulusInstance> instances,
                                     const ScoringOptions& options) override {
    std::vector<ScoreRecord> out(instances.size());
    parallel_for(instances.size(), options.workers, [&](std::size_t i) {
      try {
        out[i] = score_stimulus_vectors(store_, instances[i], spec_.tokenizer);
      } catch (const DataError& e) {
        out[i] = excluded_record(instances[i], e.what());
      }
    });
    return out;
  }

 private:
  BackendSpec spec_;
  VectorStore store_;
};

class BridgeScorer final : public Scorer {
 public:
  BridgeScorer(const BackendSpec& spec, Session session)
      : spec_(spec), session_(std::move(session)) {}
  const std::string& name() const override { return spec_.name; }
  ojson describe() const override {
    const auto& info = session_.info();
    return {{"protocol", info.protocol}, {"model", info.model}, {"type", info.type}};
  }
  // One pipelined session; the host is single-threaded by contract.
  std::vector<ScoreRecord> score_all(std::span<const StimulusInstance> instances,
                                     const ScoringOptions& options) override {
    constexpr std::size_t kChunk = 64;
    std::vector<ScoreRecord> out;
    out.reserve(instances.size());
    for (std::size_t start = 0; start < instances.size(); start += kChunk) {
      const auto batch = instances.subspan(start, std::min(kChunk, instances.size() - start));
      std::vector<ScoreRequest> requests;
      for (const auto& inst : batch) requests.push_back({"", inst.context_text, inst.critical_word});
      std::vector<ScoreResponse> responses;
      try {
        responses = session_.score_batch(requests);
      } catch (const HostError& e) {
        throw HostError("backend '" + spec_.name + "': host error: " + e.what());
      }
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto metric = aggregate(responses[i], spec_.aggregation, options.base);
        const std::string detail = "tokens=" + std::to_string(responses[i].tokens.size());
        if (!metric) {
          out.push_back(excluded_record(batch[i], detail + ";multi-token target"));
          continue;
        }
        ScoreRecord r;
        r.frame_id = batch[i].frame_id;
        r.predicate = batch[i].predicate;
        r.length = batch[i].length;
        r.metric = *metric;
        r.detail = detail;
        out.push_back(std::move(r));
      }
    }
    return out;
  }

 private:
  BackendSpec spec_;
  Session session_;
};

}  // namespace

std::unique_ptr<Scorer> make_scorer(const BackendSpec& spec, const ScoringOptions& options) {
  const std::string who = "backend '" + spec.name + "'";
  switch (spec.kind) {
    case BackendSpec::Kind::NGram: {
      std::ifstream in(spec.location, std::ios::binary);
      if (!in) throw BackendError(who + ": cannot open model file " + spec.location);
      try {
        NGramModel model = NGramModel::load(in);
        if (spec.cache_lambda) model.set_cache_lambda(*spec.cache_lambda);
        return std::make_unique<NGramScorer>(spec, std::move(model));
      } catch (const DataError& e) {
        throw BackendError(who + ": " + e.what());
      }
    }
    case BackendSpec::Kind::Vectors: {
      std::ifstream in(spec.location);
      if (!in) throw BackendError(who + ": cannot open vector file " + spec.location);
      try {
        VecLoadOptions opts;
        opts.strict = spec.strict;
        opts.source = spec.location;
        return std::make_unique<VectorScorer>(spec, load_vectors(in, opts));
      } catch (const DataError& e) {
        throw BackendError(who + ": " + e.what());
      }
    }
    case BackendSpec::Kind::Bridge: {
      try {
        return std::make_unique<BridgeScorer>(
            spec, Session::connect(Endpoint::parse(spec.location), options.session));
      } catch (const BackendError& e) {
        throw BackendError(who + ": " + e.what());
      }
    }
  }
  throw UsageError(who + ": unknown kind");
}

std::vector<ScoreRecord> run_scoring(std::span<const StoryFrame> frames,
                                     std::span<const std::unique_ptr<Scorer>> scorers,
                                     const ScoringOptions& options) {
  if (scorers.empty()) throw UsageError("at least one backend is required");
  std::set<std::string> names;
  for (const auto& s : scorers) {
    if (!names.insert(s->name()).second) {
      throw UsageError("duplicate backend name '" + s->name() + "'");
    }
  }
  const auto instances = expand(frames, options.expand);
  std::vector<std::vector<ScoreRecord>> per_backend;
  for (const auto& s : scorers) {
    per_backend.push_back(s->score_all(instances, options));
    for (auto& r : per_backend.back()) r.backend = s->name();
  }
  std::vector<ScoreRecord> rows;
  rows.reserve(instances.size() * scorers.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (auto& b : per_backend) rows.push_back(std::move(b[i]));
  }
  return rows;
}

// --- score table CSV -----------------------------------------------------

namespace {

constexpr std::string_view kHeader = "backend,frame_id,predicate,length,metric,excluded,detail";

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Splits one logical CSV record, consuming continuation lines for quoted
// newlines. Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0;; ++i) {
    if (i == line.size()) {
      if (!quoted) break;
      cur.push_back('\n');
      if (!std::getline(in, line)) throw DataError("score table: unterminated quote");
      ++line_no;
      i = static_cast<std::size_t>(-1);
      continue;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r' || i + 1 != line.size()) {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return true;
}

}  // namespace

void write_score_table(std::ostream& out, std::span<const ScoreRecord> rows) {
  out << kHeader << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.backend) << ',' << csv_field(r.frame_id) << ',' << to_string(r.predicate)
        << ',' << to_string(r.length) << ',' << (r.metric ? format_double(*r.metric) : "") << ','
        << (r.excluded ? 1 : 0) << ',' << csv_field(r.detail) << '\n';
  }
}

std::vector<ScoreRecord> read_score_table(std::istream& in) {
  std::vector<std::string> f;
  std::size_t line_no = 0;
  if (!read_csv_record(in, f, line_no)) throw DataError("score table: empty input");
  std::string header;
  for (std::size_t i = 0; i < f.size(); ++i) header += (i ? "," : "") + f[i];
  if (header != kHeader) {
    throw DataError("score table: unexpected header '" + header + "'");
  }
  std::vector<ScoreRecord> rows;
  while (read_csv_record(in, f, line_no)) {
    if (f.size() == 1 && f[0].empty()) continue;
    const std::string where = "score table line " + std::to_string(line_no);
    if (f.size() != 7) {
      throw DataError(where + ": expected 7 fields, got " + std::to_string(f.size()));
    }
    ScoreRecord r;
    r.backend = f[0];
    r.frame_id = f[1];
    try {
      r.predicate = parse_predicate(f[2]);
      r.length = parse_length(f[3]);
    } catch (const std::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!f[4].empty()) {
      double v = 0;
      const auto res = std::from_chars(f[4].data(), f[4].data() + f[4].size(), v);
      if (res.ec != std::errc() || res.ptr != f[4].data() + f[4].size() || !std::isfinite(v)) {
        throw DataError(where + ": bad metric '" + f[4] + "'");
      }
      r.metric = v;
    }
    if (f[5] != "0" && f[5] != "1") throw DataError(where + ": excluded must be 0 or 1");
    r.excluded = f[5] == "1";
    if (!r.excluded && !r.metric) throw DataError(where + ": retained row without a metric");
    r.detail = f[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

ojson run_sidecar(const ojson& config, std::span<const std::unique_ptr<Scorer>> scorers,
                  std::size_t rows) {
  ojson j;
  j["schema"] = kRunSchema;
  j["tool_version"] = kToolVersion;
  j["config_hash"] = fnv1a_hex(config.dump());
  j["config"] = config;
  j["rows"] = rows;
  ojson backends = ojson::array();
  for (const auto& s : scorers) {
    ojson b = s->describe();
    b["name"] = s->name();
    backends.push_back(std::move(b));
  }
  j["backends"] = std::move(backends);
  return j;
}

// --- analysis ------------------------------------------------------------

std::string_view to_string(FdrMethod m) { return m == FdrMethod::BY ? "by" : "bh"; }
std::string_view to_string(FdrFamily f) { return f == FdrFamily::All ? "all" : "per-backend"; }
std::string_view to_string(ExclusionPolicy e) {
  return e == ExclusionPolicy::PerBackend ? "per-backend" : "listwise";
}

FdrMethod parse_fdr_method(std::string_view s) {
  if (s == "by" || s == "BY") return FdrMethod::BY;
  if (s == "bh" || s == "BH") return FdrMethod::BH;
  throw UsageError("unknown FDR method '" + std::string(s) + "' (by|bh)");
}

FdrFamily parse_fdr_family(std::string_view s) {
  if (s == "all") return FdrFamily::All;
  if (s == "per-backend") return FdrFamily::PerBackend;
  throw UsageError("unknown FDR family '" + std::string(s) + "' (all|per-backend)");
}

ExclusionPolicy parse_exclusion(std::string_view s) {
  if (s == "per-backend") return ExclusionPolicy::PerBackend;
  if (s == "listwise") return ExclusionPolicy::Listwise;
  throw UsageError("unknown exclusion policy '" + std::string(s) + "' (per-backend|listwise)");
}

namespace {

std::string cell_name(PredicateType p, StimulusLength l) {
  return std::string(to_string(p)) + "/" + std::string(to_string(l));
}

TestResult compare_cells(const std::string& backend, const std::vector<double>& canon,
                         const std::vector<double>& noncanon, StimulusLength length) {
  const std::string a = cell_name(PredicateType::Canonical, length);
  const std::string b = cell_name(PredicateType::Noncanonical, length);
  for (const auto& [name, cell] : {std::pair{a, &canon}, std::pair{b, &noncanon}}) {
    if (cell->size() < 2) {
      throw DataError("backend '" + backend + "': cell " + name + " has " +
                      std::to_string(cell->size()) + " retained rows, need at least 2");
    }
  }
  try {
    return welch_t(canon, noncanon);
  } catch (const DegenerateVarianceError&) {
    throw DegenerateVarianceError("backend '" + backend + "': cells " + a + " and " + b +
                                  " both have zero variance");
  }
}

ojson test_json(const TestResult& t) {
  ojson j;
  j["method"] = t.method;
  j["statistic"] = t.statistic;
  j["df"] = t.df;
  j["p_raw"] = t.p_raw;
  j["p_adjusted"] = t.p_adjusted ? ojson(*t.p_adjusted) : ojson(nullptr);
  j["estimate"] = t.estimate;
  j["direction"] = t.direction;
  return j;
}

double number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw DataError(std::string("report: missing numeric field '") + key + "'");
  }
  return j[key].get<double>();
}

TestResult test_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("report: test entry must be an object");
  TestResult t;
  t.method = j.value("method", std::string());
  t.statistic = number(j, "statistic");
  t.df = number(j, "df");
  t.p_raw = number(j, "p_raw");
  if (j.contains("p_adjusted") && !j["p_adjusted"].is_null()) t.p_adjusted = number(j, "p_adjusted");
  t.estimate = number(j, "estimate");
  t.direction = static_cast<int>(number(j, "direction"));
  return t;
}

}  // namespace

EffectReport analyze(std::span<const ScoreRecord> rows, const AnalysisOptions& options) {
  if (rows.empty()) throw DataError("analyze: empty score table");
  std::vector<std::string> backends;
  std::map<std::string, std::vector<const ScoreRecord*>> by_backend;
  for (const auto& r : rows) {
    auto [it, fresh] = by_backend.try_emplace(r.backend);
    if (fresh) backends.push_back(r.backend);
    it->second.push_back(&r);
  }
  using Key = std::tuple<std::string, PredicateType, StimulusLength>;
  std::set<Key> dropped;
  if (options.exclusion == ExclusionPolicy::Listwise) {
    for (const auto& r : rows) {
      if (r.excluded || !r.metric) dropped.insert({r.frame_id, r.predicate, r.length});
    }
  }

  EffectReport report;
  report.fdr = options.fdr;
  report.family = options.family;
  report.exclusion = options.exclusion;
  for (const auto& name : backends) {
    BackendEffects fx;
    fx.backend = name;
    std::array<std::vector<double>, 4> cells;
    std::vector<Observation> obs;
    for (const ScoreRecord* r : by_backend[name]) {
      ++fx.rows;
      if (r->excluded || !r->metric || dropped.contains({r->frame_id, r->predicate, r->length})) {
        ++fx.excluded;
        continue;
      }
      cells[static_cast<std::size_t>(condition_index(r->predicate, r->length))].push_back(
          *r->metric);
      obs.push_back({*r->metric, r->frame_id, r->predicate, r->length});
    }
    fx.analyzed = obs.size();
    fx.baseline = compare_cells(name, cells[1], cells[3], StimulusLength::CriticalSentence);
    fx.reversal = compare_cells(name, cells[0], cells[2], StimulusLength::FullLength);

    const std::string who = "backend '" + name + "': ";
    try {
      const RimFit null_fit = fit_random_intercept(obs, false);
      const RimFit alt_fit = fit_random_intercept(obs, true);
      fx.reduction.lrt = likelihood_ratio_test(null_fit, alt_fit);
      fx.reduction.singular = alt_fit.singular;
      fx.reduction.null_log_likelihood = null_fit.log_likelihood;
      fx.reduction.alt_log_likelihood = alt_fit.log_likelihood;
      fx.reduction.intercept_variance = alt_fit.intercept_variance;
      fx.reduction.residual_variance = alt_fit.residual_variance;
      fx.reduction.frames = alt_fit.n_groups;
    } catch (const DataError& e) {
      throw DataError(who + e.what());
    }

    // cross-check on the frames that kept all four cells
    std::map<std::string, int> cell_count;
    for (const auto& o : obs) ++cell_count[o.frame_id];
    std::vector<Observation> complete;
    for (const auto& o : obs) {
      if (cell_count[o.frame_id] == 4) complete.push_back(o);
    }
    fx.complete_frames = complete.size() / 4;
    if (fx.complete_frames >= 2) {
      try {
        fx.cross_check = diff_of_diff_test(complete);
      } catch (const DegenerateVarianceError&) {
        // every frame shows the same difference: nothing to cross-check
      }
    }
    report.backends.push_back(std::move(fx));
  }

  auto adjust = [&](std::vector<TestResult*> family) {
    std::vector<double> p;
    for (const auto* t : family) p.push_back(t->p_raw);
    const auto adj = fdr_adjust(p, options.fdr);
    for (std::size_t i = 0; i < family.size(); ++i) family[i]->p_adjusted = adj[i];
  };
  std::vector<TestResult*> family;
  for (auto& fx : report.backends) {
    if (options.family == FdrFamily::PerBackend) family.clear();
    family.insert(family.end(), {&fx.baseline, &fx.reversal, &fx.reduction.lrt});
    if (options.family == FdrFamily::PerBackend) adjust(family);
  }
  if (options.family == FdrFamily::All) adjust(family);
  return report;
}

ojson EffectReport::to_json() const {
  ojson j;
  j["schema"] = kReportSchema;
  j["fdr"] = {{"method", to_string(fdr)},
              {"family", to_string(family)},
              {"tests_per_backend", {"baseline", "reversal", "reduction"}}};
  j["exclusion"] = to_string(exclusion);
  j["direction_convention"] = "canonical minus noncanonical";
  ojson list = ojson::array();
  for (const auto& fx : backends) {
    ojson b;
    b["backend"] = fx.backend;
    b["rows"] = fx.rows;
    b["analyzed"] = fx.analyzed;
    b["excluded"] = fx.excluded;
    b["baseline"] = test_json(fx.baseline);
    b["reversal"] = test_json(fx.reversal);
    ojson red = test_json(fx.reduction.lrt);
    red["singular"] = fx.reduction.singular;
    red["null_log_likelihood"] = fx.reduction.null_log_likelihood;
    red["alt_log_likelihood"] = fx.reduction.alt_log_likelihood;
    red["intercept_variance"] = fx.reduction.intercept_variance;
    red["residual_variance"] = fx.reduction.residual_variance;
    red["frames"] = fx.reduction.frames;
    b["reduction"] = std::move(red);
    b["cross_check"] = fx.cross_check ? test_json(*fx.cross_check) : ojson(nullptr);
    b["complete_frames"] = fx.complete_frames;
    list.push_back(std::move(b));
  }
  j["backends"] = std::move(list);
  return j;
}

EffectReport EffectReport::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("schema", std::string()) != kReportSchema) {
    throw DataError("report: missing or unsupported schema (expected " +
                    std::string(kReportSchema) + ")");
  }
  EffectReport r;
  try {
    r.fdr = parse_fdr_method(j.at("fdr").at("method").get<std::string>());
    r.family = parse_fdr_family(j.at("fdr").at("family").get<std::string>());
    r.exclusion = parse_exclusion(j.at("exclusion").get<std::string>());
    for (const auto& b : j.at("backends")) {
      BackendEffects fx;
      fx.backend = b.at("backend").get<std::string>();
      fx.rows = b.at("rows").get<std::size_t>();
      fx.analyzed = b.at("analyzed").get<std::size_t>();
      fx.excluded = b.at("excluded").get<std::size_t>();
      fx.baseline = test_from_json(b.at("baseline"));
      fx.reversal = test_from_json(b.at("reversal"));
      const auto& red = b.at("reduction");
      fx.reduction.lrt = test_from_json(red);
      fx.reduction.singular = red.at("singular").get<bool>();
      fx.reduction.null_log_likelihood = number(red, "null_log_likelihood");
      fx.reduction.alt_log_likelihood = number(red, "alt_log_likelihood");
      fx.reduction.intercept_variance = number(red, "intercept_variance");
      fx.reduction.residual_variance = number(red, "residual_variance");
      fx.reduction.frames = red.at("frames").get<std::size_t>();
      if (!b.at("cross_check").is_null()) fx.cross_check = test_from_json(b["cross_check"]);
      fx.complete_frames = b.at("complete_frames").get<std::size_t>();
      r.backends.push_back(std::move(fx));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  return r;
}

// --- summaries -----------------------------------------------------------

std::vector<ConditionSummary> summarize(std::span<const ScoreRecord> rows) {
  std::vector<std::string> backends;
  std::map<std::string, std::array<std::vector<double>, 4>> values;
  for (const auto& r : rows) {
    auto [it, fresh] = values.try_emplace(r.backend);
    if (fresh) backends.push_back(r.backend);
    if (r.excluded || !r.metric) continue;
    it->second[static_cast<std::size_t>(condition_index(r.predicate, r.length))].push_back(
        *r.metric);
  }
  std::vector<ConditionSummary> out;
  for (const auto& b : backends) {
    for (std::size_t k = 0; k < kConditions.size(); ++k) {
      const auto& xs = values[b][k];
      ConditionSummary s;
      s.backend = b;
      s.predicate = kConditions[k].predicate;
      s.length = kConditions[k].length;
      s.n = xs.size();
      if (!xs.empty()) {
        long double sum = 0;
        for (double x : xs) sum += x;
        const long double mean = sum / static_cast<long double>(xs.size());
        s.mean = static_cast<double>(mean);
        if (xs.size() >= 2) {
          long double ss = 0;
          for (double x : xs) ss += (x - mean) * (x - mean);
          s.sd = static_cast<double>(std::sqrt(ss / static_cast<long double>(xs.size() - 1)));
          s.ci95 = t_interval_half_width(*s.sd, xs.size(), 0.95);
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

void write_summary_csv(std::ostream& out, std::span<const ConditionSummary> summary) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << "backend,predicate,length,n,mean,sd,ci95_half_width\n";
  for (const auto& s : summary) {
    out << csv_field(s.backend) << ',' << to_string(s.predicate) << ',' << to_string(s.length)
        << ',' << s.n << ',' << opt(s.mean) << ',' << opt(s.sd) << ',' << opt(s.ci95) << '\n';
  }
}

ojson summary_to_json(std::span<const ConditionSummary> summary) {
  auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
  ojson cells = ojson::array();
  for (const auto& s : summary) {
    cells.push_back({{"backend", s.backend},
                     {"predicate", to_string(s.predicate)},
                     {"length", to_string(s.length)},
                     {"n", s.n},
                     {"mean", opt(s.mean)},
                     {"sd", opt(s.sd)},
                     {"ci95_half_width", opt(s.ci95)}});
  }
  return {{"schema", kSummarySchema}, {"interval", "t, 95%"}, {"cells", std::move(cells)}};
}

}  // namespace ctxscore
