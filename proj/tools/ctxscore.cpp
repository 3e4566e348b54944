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

// ctxscore: score story-frame stimuli with n-gram, vector and external
// neural backends, then test canonicality effects.
//
// Exit status: 0 success, 1 usage, 2 data error, 3 backend failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ctxscore/bridge.hpp"
#include "ctxscore/error.hpp"
#include "ctxscore/ngram.hpp"
#include "ctxscore/pipeline.hpp"
#include "ctxscore/stimulus.hpp"
#include "ctxscore/synth.hpp"

namespace fs = std::filesystem;
using namespace ctxscore;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kBackend = 3 };

struct Globals {
  std::uint64_t seed = 42;
  std::string log_base = "e";
  std::string fdr = "by";
  bool strict = false;
};

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

// Writes to a file, or to stdout for "-".
void emit(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

std::vector<StoryFrame> load_frames(const std::string& path, bool strict) {
  auto in = open_in(path);
  return parse_frames(in, FrameFormat{strict});
}

TokenizerPolicy tokenizer_from(bool lowercase, bool keep_punct) {
  return {.drop_punctuation = !keep_punct, .lowercase = lowercase};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score canonical and noncanonical story-frame stimuli and test context effects"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for randomized steps")->capture_default_str();
  app.add_option("--log-base", g.log_base, "Surprisal unit: e or 2")->capture_default_str();
  app.add_option("--fdr", g.fdr, "FDR procedure: by or bh")->capture_default_str();
  app.add_flag("--strict", g.strict, "Reject unknown frame keys and duplicate vector rows");

  // expand
  auto* expand_cmd = app.add_subcommand("expand", "Expand story frames into the four conditions");
  std::string frames_path;
  std::string out_path = "-";
  bool strip_punct = false;
  expand_cmd->add_option("--frames", frames_path, "Story frames (JSON lines)")->required();
  expand_cmd->add_option("-o,--out", out_path, "Output JSON lines")->capture_default_str();
  expand_cmd->add_flag("--strip-final-punct", strip_punct,
                       "Drop punctuation ending the story body");

  // train-ngram
  auto* train_cmd = app.add_subcommand("train-ngram", "Train a Kneser-Ney model with a cache");
  std::string corpus_path;
  std::string model_path;
  NGramOptions ngram_opts;
  bool no_cache = false;
  bool lowercase = false;
  bool keep_punct = false;
  train_cmd->add_option("--corpus", corpus_path, "One sentence per line")->required();
  train_cmd->add_option("-o,--out", model_path, "Binary model file")->required();
  train_cmd->add_option("--order", ngram_opts.order)->capture_default_str();
  train_cmd->add_option("--discount", ngram_opts.discount)->capture_default_str();
  train_cmd->add_option("--cache-lambda", ngram_opts.cache_lambda,
                        "Weight of the static model against the document cache")
      ->capture_default_str();
  train_cmd->add_flag("--no-cache", no_cache, "Disable the document cache");
  train_cmd->add_flag("--lowercase", lowercase);
  train_cmd->add_flag("--keep-punct", keep_punct);

  // score
  auto* score_cmd = app.add_subcommand("score", "Score every stimulus with every backend");
  std::vector<std::string> backend_texts;
  std::string table_path;
  std::string meta_path;
  std::string aggregation = "sum";
  int workers = 4;
  long timeout_ms = 120000;
  double cache_lambda = -1;
  score_cmd->add_option("--frames", frames_path)->required();
  score_cmd
      ->add_option("-b,--backend", backend_texts,
                   "[name=]ngram:FILE | [name=]vectors:FILE | [name=]bridge:ENDPOINT")
      ->required();
  score_cmd->add_option("-o,--out", table_path, "Score table CSV")->required();
  score_cmd->add_option("--meta", meta_path, "Run sidecar JSON (default: <out>.json)");
  score_cmd->add_option("--aggregation", aggregation, "Bridge token policy: sum or single")
      ->capture_default_str();
  score_cmd->add_option("--workers", workers)->capture_default_str()->check(CLI::Range(1, 256));
  score_cmd->add_option("--timeout-ms", timeout_ms, "Per-request bridge timeout")
      ->capture_default_str();
  score_cmd->add_option("--cache-lambda", cache_lambda, "Override n-gram cache weight");
  score_cmd->add_flag("--lowercase", lowercase);
  score_cmd->add_flag("--keep-punct", keep_punct);
  score_cmd->add_flag("--strip-final-punct", strip_punct);

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Baseline, reversal and reduction tests");
  std::string family = "all";
  std::string exclusion = "per-backend";
  std::string report_path = "-";
  analyze_cmd->add_option("--table", table_path)->required();
  analyze_cmd->add_option("-o,--out", report_path, "Report JSON")->capture_default_str();
  analyze_cmd->add_option("--family", family, "FDR family: all or per-backend")
      ->capture_default_str();
  analyze_cmd->add_option("--exclusion", exclusion, "per-backend or listwise")
      ->capture_default_str();

  // summarize
  auto* summarize_cmd = app.add_subcommand("summarize", "Per-condition n, mean, sd and 95% CI");
  std::string summary_csv = "-";
  std::string summary_json;
  summarize_cmd->add_option("--table", table_path)->required();
  summarize_cmd->add_option("--csv", summary_csv)->capture_default_str();
  summarize_cmd->add_option("--json", summary_json);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-effect corpus and frames");
  SynthParams synth;
  std::string synth_dir;
  synth_cmd->add_option("-o,--out-dir", synth_dir,
                        "Writes corpus.txt, frames.jsonl and vectors.vec")
      ->required();
  synth_cmd->add_option("--frames", synth.frames)->capture_default_str();
  synth_cmd->add_option("--strength", synth.strength, "Priming strength, 0 plants nothing")
      ->capture_default_str();
  synth_cmd->add_option("--vocab-size", synth.vocab_size)->capture_default_str();
  synth_cmd->add_option("--cues", synth.cues_per_frame)->capture_default_str();
  synth_cmd->add_option("--fillers", synth.fillers)->capture_default_str();
  synth_cmd->add_option("--dim", synth.dimension)->capture_default_str();

  // serve-check
  auto* check_cmd = app.add_subcommand("serve-check", "Probe a scoring host's handshake");
  std::string endpoint;
  check_cmd->add_option("--endpoint", endpoint, "pipe:COMMAND or tcp:HOST:PORT")->required();
  check_cmd->add_option("--timeout-ms", timeout_ms)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const LogBase base = parse_log_base(g.log_base);
    const FdrMethod fdr = parse_fdr_method(g.fdr);

    if (*expand_cmd) {
      const auto frames = load_frames(frames_path, g.strict);
      std::ostringstream out;
      for (const auto& s : expand(frames, {.strip_context_final_punctuation = strip_punct})) {
        nlohmann::ordered_json j;
        j["frame_id"] = s.frame_id;
        j["predicate"] = to_string(s.predicate);
        j["length"] = to_string(s.length);
        j["context"] = s.context_text;
        j["critical_word"] = s.critical_word;
        out << j.dump() << '\n';
      }
      emit(out_path, out.str());
    } else if (*train_cmd) {
      if (no_cache) ngram_opts.cache_mode = CacheMode::Off;
      auto in = open_in(corpus_path);
      const auto corpus = read_corpus(in, tokenizer_from(lowercase, keep_punct));
      const NGramModel model = NGramModel::train(corpus, ngram_opts);
      std::ostringstream out(std::ios::binary);
      model.save(out);
      emit(model_path, out.str());
      std::cerr << "trained order-" << model.order() << " model on " << corpus.size()
                << " sentences, |V| = " << model.vocabulary().size() << "\n";
    } else if (*score_cmd) {
      ScoringOptions opts;
      opts.base = base;
      opts.workers = workers;
      opts.expand.strip_context_final_punctuation = strip_punct;
      opts.session.timeout = std::chrono::milliseconds(timeout_ms);
      const auto frames = load_frames(frames_path, g.strict);
      std::vector<BackendSpec> specs;
      nlohmann::ordered_json config;
      config["frames"] = fs::path(frames_path).filename().string();
      config["frames_hash"] = [&] {
        auto in = open_in(frames_path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return fnv1a_hex(ss.str());
      }();
      config["log_base"] = to_string(base);
      config["strip_final_punct"] = strip_punct;
      config["seed"] = g.seed;
      config["backends"] = nlohmann::ordered_json::array();
      for (const auto& text : backend_texts) {
        BackendSpec spec = BackendSpec::parse(text);
        spec.tokenizer = tokenizer_from(lowercase, keep_punct);
        spec.aggregation = parse_aggregation(aggregation);
        spec.strict = g.strict;
        if (cache_lambda >= 0) spec.cache_lambda = cache_lambda;
        config["backends"].push_back(spec.to_json());
        specs.push_back(std::move(spec));
      }
      std::vector<std::unique_ptr<Scorer>> scorers;
      for (const auto& spec : specs) scorers.push_back(make_scorer(spec, opts));
      const auto rows = run_scoring(frames, scorers, opts);
      std::ostringstream table;
      write_score_table(table, rows);
      emit(table_path, table.str());
      const std::string sidecar = meta_path.empty() ? table_path + ".json" : meta_path;
      if (table_path != "-" || !meta_path.empty()) {
        emit(sidecar, run_sidecar(config, scorers, rows.size()).dump(2) + "\n");
      }
    } else if (*analyze_cmd) {
      auto in = open_in(table_path);
      const auto rows = read_score_table(in);
      AnalysisOptions opts;
      opts.fdr = fdr;
      opts.family = parse_fdr_family(family);
      opts.exclusion = parse_exclusion(exclusion);
      emit(report_path, analyze(rows, opts).to_json().dump(2) + "\n");
    } else if (*summarize_cmd) {
      auto in = open_in(table_path);
      const auto rows = read_score_table(in);
      if (rows.empty()) throw DataError("summarize: empty score table");
      const auto summary = summarize(rows);
      std::ostringstream csv;
      write_summary_csv(csv, summary);
      emit(summary_csv, csv.str());
      if (!summary_json.empty()) emit(summary_json, summary_to_json(summary).dump(2) + "\n");
    } else if (*synth_cmd) {
      synth.seed = g.seed;
      const SynthOutput out = synthesize(synth);
      fs::create_directories(synth_dir);
      const fs::path dir(synth_dir);
      std::ostringstream corpus, frames, vectors;
      write_corpus(corpus, out.corpus);
      serialize_frames(frames, out.frames);
      save_vectors(vectors, out.vectors);
      emit((dir / "corpus.txt").string(), corpus.str());
      emit((dir / "frames.jsonl").string(), frames.str());
      emit((dir / "vectors.vec").string(), vectors.str());
    } else if (*check_cmd) {
      SessionOptions opts;
      opts.timeout = std::chrono::milliseconds(timeout_ms);
      opts.retries = 0;
      Session s = Session::connect(Endpoint::parse(endpoint), opts);
      nlohmann::ordered_json j;
      j["protocol"] = s.info().protocol;
      j["model"] = s.info().model;
      j["type"] = s.info().type;
      std::cout << j.dump() << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const BackendError& e) {
    std::cerr << "backend failure: " << e.what() << '\n';
    return kBackend;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
