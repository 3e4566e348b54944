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

#include "ctxscore/synth.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <set>

#include "ctxscore/error.hpp"

namespace ctxscore {
namespace {

// std distributions are implementation-defined; these are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }
  int between(int lo, int hi) { return lo + static_cast<int>(below(hi - lo + 1)); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u = uniform();
    while (u <= 0.0) u = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(a);
    return r * std::cos(a);
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// Pronounceable, collision-free: three consonant-vowel syllables per index.
std::string pseudo_word(std::uint64_t index) {
  static constexpr std::string_view kCons = "bdfghklmnprstvz";
  static constexpr std::string_view kVow = "aeiou";
  std::string w;
  for (int k = 0; k < 3; ++k) {
    const std::uint64_t syl = index % 75;
    index /= 75;
    w.push_back(kCons[syl / 5]);
    w.push_back(kVow[syl % 5]);
  }
  return w;
}

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
  return s;
}

const std::vector<std::string> kFunction = {"de", "en", "was", "het", "een"};

struct FrameWords {
  std::string noun, canonical, noncanonical;
  std::vector<std::string> cues;
};

}  // namespace

SynthOutput synthesize(const SynthParams& p) {
  if (p.frames < 2) throw DataError("synth: need at least 2 frames");
  if (!(p.strength >= 0.0) || !std::isfinite(p.strength)) {
    throw DataError("synth: priming strength must be a finite value >= 0");
  }
  if (p.cues_per_frame < 1 || p.fillers < 10 || p.dimension < 2) {
    throw DataError("synth: need at least 1 cue per frame, 10 fillers and 2 dimensions");
  }
  const long long needed =
      static_cast<long long>(p.frames) * (3 + p.cues_per_frame) + p.fillers;
  if (p.vocab_size > 421875) throw DataError("synth: vocab_size is capped at 421875");
  if (needed > p.vocab_size) {
    throw DataError("synth: vocabulary too small: " + std::to_string(p.frames) +
                    " frames need " + std::to_string(needed) + " content words, have " +
                    std::to_string(p.vocab_size));
  }
  Rng rng(p.seed);

  // role assignment over a shuffled pool of pseudo-words
  std::vector<std::uint64_t> pool(static_cast<std::size_t>(p.vocab_size));
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i * 7919 % 421875;
  rng.shuffle(pool);
  std::size_t next = 0;
  auto take = [&] { return pseudo_word(pool[next++]); };
  std::vector<std::string> fillers;
  for (int i = 0; i < p.fillers; ++i) fillers.push_back(take());
  std::vector<FrameWords> words(static_cast<std::size_t>(p.frames));
  for (auto& w : words) {
    w.noun = take();
    w.canonical = take();
    w.noncanonical = take();
    for (int c = 0; c < p.cues_per_frame; ++c) w.cues.push_back(take());
  }

  auto filler_run = [&](int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
      out.push_back(rng.below(4) == 0 ? rng.pick(kFunction) : rng.pick(fillers));
    }
    return out;
  };
  auto embed = [&](std::vector<std::string> core) {
    auto s = filler_run(rng.between(0, 3));
    s.insert(s.end(), core.begin(), core.end());
    const auto tail = filler_run(rng.between(1, 3));
    s.insert(s.end(), tail.begin(), tail.end());
    return join(s);
  };

  const int planted = static_cast<int>(std::lround(4.0 * p.strength));
  const int mentions = static_cast<int>(std::lround(p.strength));
  SynthOutput out;
  for (const auto& w : words) {
    // background shared by both predicate types
    for (int k = rng.between(2, 4); k > 0; --k) {
      auto s = std::vector<std::string>{"de", w.noun};
      const auto tail = filler_run(rng.between(2, 4));
      s.insert(s.end(), tail.begin(), tail.end());
      out.corpus.push_back(join(s));
    }
    for (const auto* critical : {&w.canonical, &w.noncanonical}) {
      for (int k = rng.between(2, 6); k > 0; --k) out.corpus.push_back(embed({*critical}));
    }
    for (const auto& cue : w.cues) {
      for (int k = rng.between(2, 4); k > 0; --k) out.corpus.push_back(embed({cue}));
    }
    // planted associations
    for (int k = 0; k < planted; ++k) {
      auto s = std::vector<std::string>{"de", w.noun, w.canonical};
      const auto tail = filler_run(rng.between(1, 3));
      s.insert(s.end(), tail.begin(), tail.end());
      out.corpus.push_back(join(s));
      out.corpus.push_back(
          embed({w.cues[static_cast<std::size_t>(k) % w.cues.size()], "de", w.noun,
                 w.noncanonical}));
    }
  }
  for (int k = 0; k < p.background_sentences; ++k) {
    out.corpus.push_back(join(filler_run(rng.between(4, 9))));
  }
  rng.shuffle(out.corpus);

  // story frames
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    std::vector<std::string> sentences;
    for (std::size_t c = 0; c < w.cues.size(); ++c) {
      std::vector<std::string> s = {"de", w.cues[c], rng.pick(fillers),
                                    w.cues[(c + 1) % w.cues.size()]};
      if (static_cast<int>(c) < mentions) {
        s.insert(s.begin() + 2, {"en", w.noncanonical});
      }
      sentences.push_back(join(s));
    }
    // extra mentions beyond one per sentence go in a closing sentence
    if (mentions > static_cast<int>(w.cues.size())) {
      std::vector<std::string> s;
      for (int m = static_cast<int>(w.cues.size()); m < mentions; ++m) {
        s.insert(s.end(), {w.noncanonical, "en"});
      }
      s.push_back(w.cues.back());
      sentences.push_back(join(s));
    }
    std::string body;
    for (const auto& s : sentences) body += (body.empty() ? "" : " ") + s + ".";
    StoryFrame f;
    char id[24];
    std::snprintf(id, sizeof id, "f%03zu", i + 1);
    f.frame_id = id;
    f.context = body;
    f.target_prefix = "de " + w.noun;
    f.canonical_word = w.canonical;
    f.noncanonical_word = w.noncanonical;
    out.frames.push_back(std::move(f));
  }

  // vector store over the full vocabulary
  const Eigen::Index dim = p.dimension;
  auto random_unit = [&] {
    VecXd v(dim);
    for (Eigen::Index d = 0; d < dim; ++d) v[d] = rng.normal();
    return VecXd(v.normalized());
  };
  out.vectors = VectorStore(dim, "synth");
  for (const auto& f : kFunction) out.vectors.insert(f, random_unit());
  for (const auto& f : fillers) out.vectors.insert(f, random_unit());
  const double pull = 1.5 * p.strength;
  for (const auto& w : words) {
    const VecXd noun = random_unit();
    out.vectors.insert(w.noun, noun);
    VecXd centroid = VecXd::Zero(dim);
    for (const auto& cue : w.cues) {
      const VecXd v = random_unit();
      centroid += v;
      out.vectors.insert(cue, v);
    }
    centroid.normalize();
    out.vectors.insert(w.canonical, (random_unit() + pull * noun).normalized());
    out.vectors.insert(w.noncanonical, (random_unit() + pull * centroid).normalized());
  }
  return out;
}

void write_corpus(std::ostream& out, const std::vector<std::string>& corpus) {
  for (const auto& line : corpus) out << line << '\n';
}

}  // namespace ctxscore
