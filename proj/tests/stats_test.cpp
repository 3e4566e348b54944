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

#include "ctxscore/stats.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "ctxscore/error.hpp"
#include "test_util.hpp"

using namespace ctxscore;

namespace {

constexpr double kRel = 1e-6;

void expect_close(double got, double want, const std::string& what) {
  EXPECT_TRUE(std::abs(got - want) <= std::max(kRel * std::abs(want), 1e-9))
      << what << ": got " << got << ", want " << want;
}

std::vector<Observation> rows_from(const nlohmann::json& rows) {
  std::vector<Observation> out;
  for (const auto& r : rows) {
    out.push_back({r[0].get<double>(), r[1].get<std::string>(),
                   r[2].get<int>() ? PredicateType::Canonical : PredicateType::Noncanonical,
                   r[3].get<int>() ? StimulusLength::FullLength : StimulusLength::CriticalSentence});
  }
  return out;
}

// Balanced 2x2 data with frame intercepts and a planted interaction.
std::vector<Observation> simulate(int frames, double frame_sd, double effect, double noise,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Observation> out;
  for (int f = 0; f < frames; ++f) {
    const std::string id = "f" + std::to_string(f);
    const double b = frame_sd * n01(rng);
    for (const auto& c : kConditions) {
      const double canon = c.predicate == PredicateType::Canonical;
      const double full = c.length == StimulusLength::FullLength;
      const double y = 3.0 + b - canon - 0.3 * full + effect * canon * full + noise * n01(rng);
      out.push_back({y, id, c.predicate, c.length});
    }
  }
  return out;
}

// Step-up procedure written straight from its definition: the adjusted value
// of the i-th smallest p is the minimum over j >= i of min(1, p_(j) * (m c / j)).
std::vector<double> brute_force_fdr(const std::vector<double>& p, FdrMethod method) {
  const std::size_t m = p.size();
  double c = 1.0;
  if (method == FdrMethod::BY) {
    c = 0.0;
    for (std::size_t i = 1; i <= m; ++i) c += 1.0 / static_cast<double>(i);
  }
  const double scale = static_cast<double>(m) * c;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double best = 1.0;
    for (std::size_t j = i; j < m; ++j) {
      best = std::min(best, std::min(1.0, p[order[j]] * (scale / static_cast<double>(j + 1))));
    }
    out[order[i]] = best;
  }
  return out;
}

}  // namespace

TEST(Welch, MatchesReferenceOracle) {
  const auto cases = ctxtest::load_json("stats_oracle.json")["welch"];
  ASSERT_GE(cases.size(), 20u);
  for (const auto& c : cases) {
    const auto xs = c["xs"].get<std::vector<double>>();
    const auto ys = c["ys"].get<std::vector<double>>();
    const auto r = welch_t(xs, ys);
    expect_close(r.statistic, c["t"], "t");
    expect_close(r.df, c["df"], "df");
    expect_close(r.p_raw, c["p"], "p");
  }
}

TEST(Welch, IdenticalAndSwapped) {
  const std::vector<double> xs = {1.0, 2.5, 3.0, 4.25};
  const auto same = welch_t(xs, xs);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_EQ(same.p_raw, 1.0);
  const std::vector<double> ys = {0.5, 0.75, 2.0};
  const auto a = welch_t(xs, ys);
  const auto b = welch_t(ys, xs);
  EXPECT_EQ(a.statistic, -b.statistic);
  EXPECT_EQ(a.p_raw, b.p_raw);
  EXPECT_EQ(a.direction, 1);
  EXPECT_EQ(b.direction, -1);
}

TEST(Welch, AffineInvariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> xs(12), ys(9);
    for (auto& x : xs) x = n(rng);
    for (auto& y : ys) y = 0.4 + 2.0 * n(rng);
    const double a = 0.01 + 10.0 * std::abs(n(rng));
    const double b = 100.0 * n(rng);
    auto tx = xs, ty = ys;
    for (auto& x : tx) x = a * x + b;
    for (auto& y : ty) y = a * y + b;
    const auto r0 = welch_t(xs, ys);
    const auto r1 = welch_t(tx, ty);
    EXPECT_NEAR(r1.statistic, r0.statistic, 1e-10 * std::max(1.0, std::abs(r0.statistic)));
    EXPECT_NEAR(r1.p_raw, r0.p_raw, 1e-10);
  }
}

TEST(Welch, Errors) {
  const std::vector<double> c1 = {2.0, 2.0, 2.0};
  const std::vector<double> c2 = {3.0, 3.0};
  EXPECT_THROW(welch_t(c1, c2), DegenerateVarianceError);
  const std::vector<double> one = {1.0};
  EXPECT_THROW(welch_t(one, c1), DataError);
}

TEST(Fdr, MatchesReferenceOracle) {
  const auto cases = ctxtest::load_json("stats_oracle.json")["fdr"];
  ASSERT_GE(cases.size(), 20u);
  for (const auto& c : cases) {
    const auto p = c["p"].get<std::vector<double>>();
    const auto bh = fdr_adjust(p, FdrMethod::BH);
    const auto by = fdr_adjust(p, FdrMethod::BY);
    const auto want_bh = c["bh"].get<std::vector<double>>();
    const auto want_by = c["by"].get<std::vector<double>>();
    for (std::size_t i = 0; i < p.size(); ++i) {
      expect_close(bh[i], want_bh[i], "bh");
      expect_close(by[i], want_by[i], "by");
    }
  }
}

TEST(Fdr, BruteForceEquivalence) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + rng() % 8;
    std::vector<double> p(m);
    for (auto& x : p) x = trial % 3 == 0 ? std::pow(u(rng), 4) : u(rng);
    if (trial % 7 == 0 && m > 1) p[1] = p[0];  // ties
    for (auto method : {FdrMethod::BH, FdrMethod::BY}) {
      ASSERT_EQ(fdr_adjust(p, method), brute_force_fdr(p, method)) << trial;
    }
  }
}

TEST(Fdr, Properties) {
  const std::vector<double> single = {0.03};
  EXPECT_EQ(fdr_adjust(single, FdrMethod::BH), single);
  EXPECT_EQ(fdr_adjust(single, FdrMethod::BY), single);
  const std::vector<double> equal(5, 0.2);
  EXPECT_EQ(fdr_adjust(equal, FdrMethod::BH), equal);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(1 + rng() % 12);
    for (auto& x : p) x = u(rng);
    const auto bh = fdr_adjust(p, FdrMethod::BH);
    const auto by = fdr_adjust(p, FdrMethod::BY);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_LE(bh[i], by[i]);
      EXPECT_GE(bh[i], p[i]);
      EXPECT_LE(by[i], 1.0);
    }
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) EXPECT_LE(bh[order[i - 1]], bh[order[i]]);
  }
  const std::vector<double> bad = {0.5, 1.5};
  EXPECT_THROW(fdr_adjust(bad, FdrMethod::BH), DataError);
}

TEST(MixedModel, MatchesReferenceOracle) {
  const auto cases = ctxtest::load_json("stats_oracle.json")["mixed"];
  ASSERT_GE(cases.size(), 20u);
  int index = 0;
  for (const auto& c : cases) {
    SCOPED_TRACE("case " + std::to_string(index++));
    const auto data = rows_from(c["rows"]);
    const auto null_fit = fit_random_intercept(data, false);
    const auto alt_fit = fit_random_intercept(data, true);
    for (const auto& [fit, ref] : {std::pair{&null_fit, c["null"]}, std::pair{&alt_fit, c["alt"]}}) {
      expect_close(fit->log_likelihood, ref["loglik"], "loglik");
      const auto beta = ref["beta"].get<std::vector<double>>();
      ASSERT_EQ(static_cast<std::size_t>(fit->beta.size()), beta.size());
      for (std::size_t i = 0; i < beta.size(); ++i) {
        EXPECT_NEAR(fit->beta[static_cast<Eigen::Index>(i)], beta[i], 1e-5);
      }
      EXPECT_NEAR(fit->residual_variance, ref["sigma2"].get<double>(), 1e-5);
      EXPECT_NEAR(fit->intercept_variance,
                  ref["theta"].get<double>() * ref["sigma2"].get<double>(), 1e-5);
    }
    const auto lrt = likelihood_ratio_test(null_fit, alt_fit);
    expect_close(lrt.statistic, c["lrt_stat"], "lrt statistic");
    expect_close(lrt.p_raw, c["lrt_p"], "lrt p");
    EXPECT_EQ(lrt.df, 1.0);
    if (c.contains("dod")) {
      const auto dod = diff_of_diff_test(data);
      expect_close(dod.statistic, c["dod"]["t"], "dod t");
      expect_close(dod.df, c["dod"]["df"], "dod df");
      expect_close(dod.p_raw, c["dod"]["p"], "dod p");
    }
  }
}

TEST(MixedModel, ZeroFrameVarianceIsSingularOls) {
  // identical intercepts; residual noise only
  auto data = simulate(30, 0.0, 0.5, 0.5, 3);
  // make frame means exactly equal so the ML ratio sits on the boundary
  std::map<std::string, double> mean;
  for (const auto& o : data) mean[o.frame_id] += o.value / 4;
  double grand = 0;
  for (const auto& [k, v] : mean) grand += v / static_cast<double>(mean.size());
  for (auto& o : data) o.value += grand - mean[o.frame_id];

  const auto fit = fit_random_intercept(data, true);
  EXPECT_TRUE(fit.singular);
  EXPECT_NEAR(fit.intercept_variance, 0.0, 1e-8);

  MatXd X(static_cast<Eigen::Index>(data.size()), 4);
  VecXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double canon = data[i].predicate == PredicateType::Canonical;
    const double full = data[i].length == StimulusLength::FullLength;
    X.row(static_cast<Eigen::Index>(i)) << 1.0, canon, full, canon * full;
    y[static_cast<Eigen::Index>(i)] = data[i].value;
  }
  const VecXd ols = X.colPivHouseholderQr().solve(y);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(fit.beta[k], ols[k], 1e-6);
}

TEST(MixedModel, ProfileAtZeroIsOlsLikelihood) {
  const auto data = simulate(10, 1.0, 0.0, 0.5, 8);
  MatX<long double> X(40, 3);
  VecX<long double> y(40);
  std::vector<int> group(40), size(10, 4);
  for (int i = 0; i < 40; ++i) {
    X.row(i) << 1.0L, data[i].predicate == PredicateType::Canonical,
        data[i].length == StimulusLength::FullLength;
    y[i] = data[i].value;
    group[static_cast<std::size_t>(i)] = i / 4;
  }
  const auto pt = profile_log_likelihood<long double>(X, y, group, size, 0.0L);
  const VecX<long double> beta = X.colPivHouseholderQr().solve(y);
  const long double rss = (y - X * beta).squaredNorm();
  const long double ll = -20.0L * (std::log(2 * 3.14159265358979323846L * rss / 40) + 1);
  EXPECT_NEAR(static_cast<double>(pt.log_likelihood), static_cast<double>(ll), 1e-10);
}

TEST(MixedModel, PlantedFrameVarianceBeatsBoundary) {
  const auto data = simulate(60, 1.5, 0.0, 0.5, 11);
  const auto fit = fit_random_intercept(data, true);
  EXPECT_FALSE(fit.singular);
  // generating values: intercept variance 2.25, residual variance 0.25
  EXPECT_NEAR(fit.intercept_variance, 2.25, 0.9);
  EXPECT_NEAR(fit.residual_variance, 0.25, 0.06);
}

TEST(MixedModel, NestedOrdering) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto data = simulate(20, 0.7, 0.2, 0.5, seed);
    EXPECT_GE(fit_random_intercept(data, true).log_likelihood,
              fit_random_intercept(data, false).log_likelihood - 1e-9);
  }
}

TEST(MixedModel, RankDeficientDesign) {
  auto data = simulate(5, 1.0, 0.0, 0.5, 2);
  std::erase_if(data, [](const Observation& o) { return o.predicate == PredicateType::Canonical; });
  EXPECT_THROW(fit_random_intercept(data, false), DataError);
  const auto one_frame = simulate(1, 1.0, 0.0, 0.5, 2);
  EXPECT_THROW(fit_random_intercept(one_frame, false), DataError);
}

TEST(Lrt, PlantedInteractionAndCrossCheck) {
  const auto data = simulate(60, 1.0, 1.0, 0.5, 42);
  const auto lrt = likelihood_ratio_test(fit_random_intercept(data, false),
                                         fit_random_intercept(data, true));
  EXPECT_LT(lrt.p_raw, 0.001);
  EXPECT_EQ(lrt.direction, 1);
  const auto dod = diff_of_diff_test(data);
  EXPECT_LT(dod.p_raw, 0.001);
  EXPECT_EQ(dod.direction, lrt.direction);
}

TEST(Lrt, EqualLikelihoodsAndNesting) {
  const auto data = simulate(10, 1.0, 0.0, 0.5, 4);
  const auto null_fit = fit_random_intercept(data, false);
  auto alt = fit_random_intercept(data, true);
  alt.log_likelihood = null_fit.log_likelihood;
  const auto r = likelihood_ratio_test(null_fit, alt);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_raw, 1.0);
  EXPECT_THROW(likelihood_ratio_test(null_fit, null_fit), DataError);
  const auto other = fit_random_intercept(simulate(10, 1.0, 0.0, 0.5, 5), true);
  EXPECT_THROW(likelihood_ratio_test(null_fit, other), DataError);
}

TEST(Lrt, StatisticMonotoneInAltLikelihood) {
  const auto data = simulate(10, 1.0, 0.3, 0.5, 6);
  const auto null_fit = fit_random_intercept(data, false);
  auto alt = fit_random_intercept(data, true);
  double last = -1;
  for (double bump : {0.0, 0.5, 1.0, 4.0}) {
    auto a = alt;
    a.log_likelihood += bump;
    const double s = likelihood_ratio_test(null_fit, a).statistic;
    EXPECT_GE(s, 0.0);
    EXPECT_GT(s, last);
    last = s;
  }
}

TEST(DiffOfDiff, DegenerateAndInvariant) {
  auto flat = simulate(6, 1.0, 0.0, 0.5, 9);
  // copy each frame's sentence cells into its full cells: every d is zero
  std::map<std::pair<std::string, PredicateType>, double> sent;
  for (const auto& o : flat) {
    if (o.length == StimulusLength::CriticalSentence) sent[{o.frame_id, o.predicate}] = o.value;
  }
  for (auto& o : flat) o.value = sent[{o.frame_id, o.predicate}];
  EXPECT_THROW(diff_of_diff_test(flat), DegenerateVarianceError);

  const auto data = simulate(12, 1.0, 0.4, 0.5, 10);
  auto shifted = data;
  for (auto& o : shifted) o.value += 17.0;
  const auto a = diff_of_diff_test(data);
  const auto b = diff_of_diff_test(shifted);
  EXPECT_NEAR(a.statistic, b.statistic, 1e-9);
  EXPECT_NEAR(a.p_raw, b.p_raw, 1e-9);

  auto missing = data;
  missing.pop_back();
  EXPECT_THROW(diff_of_diff_test(missing), DataError);
}
