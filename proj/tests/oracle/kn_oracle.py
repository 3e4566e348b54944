#!/usr/bin/env python3
# Copyright 2026 The ctxscore Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Straight-from-the-definition interpolated Kneser-Ney, used as a test oracle.

Model definition (shared contract with src/ngram.cpp):
  * tokens seen once in training become <unk>
  * vocabulary = training types + <unk> + </s>; <s> is context-only
  * sentences are padded with order-1 <s> and one </s>
  * top level uses raw counts, lower levels continuation counts
    N1+(. g) taken over the distinct n-grams one level up
  * P_k(w|h) = max(c(hw)-D,0)/c(h.) + D*N1+(h.)/c(h.) * P_{k-1}(w|h'),
    falling straight through to P_{k-1} when c(h.) = 0; P_0 = 1/|V|
  * cache mixture: lam*P_KN + (1-lam)*(count(w in doc)+1)/(|doc|+|V|)

Writes tests/data/kn_corpus.txt and tests/data/kn_expected.json.
"""

import json
import os
import random
import sys
from collections import Counter, defaultdict

UNK, BOS, EOS = "<unk>", "<s>", "</s>"


class KN:
    def __init__(self, corpus, order, discount):
        self.order, self.D = order, discount
        freq = Counter(t for s in corpus for t in s)
        sents = [[t if freq[t] > 1 else UNK for t in s] for s in corpus]
        self.vocab = sorted({t for s in sents for t in s} | {UNK, EOS})
        self.vset = set(self.vocab)
        top = Counter()
        for s in sents:
            padded = [BOS] * (order - 1) + s + [EOS]
            for i in range(order - 1, len(padded)):
                top[tuple(padded[i - order + 1:i + 1])] += 1
        # counts[k] maps k-gram -> count used at level k
        self.counts = {order: top}
        for k in range(order - 1, 0, -1):
            cont = Counter()
            for g in self.counts[k + 1]:
                cont[g[1:]] += 1
            self.counts[k] = cont
        self.ctx = {}
        for k, table in self.counts.items():
            tot, types = defaultdict(int), defaultdict(int)
            for g, c in table.items():
                tot[g[:-1]] += c
                types[g[:-1]] += 1
            self.ctx[k] = (tot, types)

    def norm(self, tokens):
        return [t if t in self.vset or t == BOS else UNK for t in tokens]

    def p_level(self, k, w, h):
        if k == 0:
            return 1.0 / len(self.vocab)
        tot, types = self.ctx[k]
        h = tuple(h)
        lower = self.p_level(k - 1, w, h[1:])
        if tot.get(h, 0) == 0:
            return lower
        c = self.counts[k].get(h + (w,), 0)
        return max(c - self.D, 0) / tot[h] + self.D * types[h] / tot[h] * lower

    def p(self, w, context):
        h = ([BOS] * (self.order - 1) + self.norm(context))[-(self.order - 1):] \
            if self.order > 1 else []
        return self.p_level(self.order, self.norm([w])[0], h)

    def p_mix(self, w, context, doc, lam):
        wn = self.norm([w])[0]
        dn = self.norm(doc)
        cache = (dn.count(wn) + 1) / (len(dn) + len(self.vocab))
        return lam * self.p(w, context) + (1 - lam) * cache


def make_corpus(rng, n):
    words = ["w%03d" % i for i in range(220)]
    weights = [1.0 / (i + 1) ** 1.1 for i in range(len(words))]
    out = []
    for _ in range(n):
        length = rng.randint(1, 14)
        s = []
        for _ in range(length):
            # a little local structure so higher orders matter
            if s and rng.random() < 0.35:
                j = (int(s[-1][1:]) * 7 + 3) % 40
                s.append(words[j])
            else:
                s.append(rng.choices(words, weights)[0])
        out.append(s)
    return out


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    data = os.path.join(here, "..", "data")
    rng = random.Random(7)
    corpus = make_corpus(rng, 1000)
    with open(os.path.join(data, "kn_corpus.txt"), "w") as f:
        for s in corpus:
            f.write(" ".join(s) + "\n")

    models = []
    for order in (1, 2, 3, 4):
        m = KN(corpus, order, 0.75)
        contexts = [[]]
        for _ in range(12):
            s = rng.choice(corpus)
            cut = rng.randint(0, len(s))
            contexts.append(s[:cut])
        contexts.append(["never_seen", "w000"])
        rows = []
        for ctx in contexts:
            dist = [m.p(w, ctx) for w in m.vocab]
            total = sum(dist)
            assert abs(total - 1) < 1e-9, total
            rows.append({"context": ctx, "probs": dist})
        models.append({"order": order, "discount": 0.75, "vocab": m.vocab,
                       "contexts": rows})
        print("order %d |V|=%d" % (order, len(m.vocab)), file=sys.stderr)

    # tiny fixture for the cache mixture
    tiny = [["a", "b", "a", "b"], ["a", "c", "a"], ["b", "a", "c"]]
    t = KN(tiny, 2, 0.75)
    doc = ["a", "c", "c", "zzz", "b"]
    mix = {
        "corpus": tiny, "order": 2, "discount": 0.75, "lambda": 0.9,
        "vocab": t.vocab, "context": ["a"], "document": doc,
        "p_kn": {w: t.p(w, ["a"]) for w in t.vocab},
        "p_mix": {w: t.p_mix(w, ["a"], doc, 0.9) for w in t.vocab},
    }
    with open(os.path.join(data, "kn_expected.json"), "w") as f:
        json.dump({"discount": 0.75, "models": models, "tiny": mix}, f)
        f.write("\n")


if __name__ == "__main__":
    main()
