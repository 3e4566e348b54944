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

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>
#include <unordered_map>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "ctxscore/error.hpp"

namespace ctxscore {
namespace {

int sign(double x) { return (x > 0) - (x < 0); }

struct Moments {
  long double mean = 0;
  long double var = 0;  // unbiased
};

Moments moments(std::span<const double> xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<long double>(xs.size());
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<long double>(xs.size() - 1);
  return m;
}

// Lower edge of the variance-ratio search; anything below is a singular fit.
constexpr double kSingularRatio = 1e-10;
constexpr double kRatioRelTol = 1e-8;

}  // namespace

double t_two_tailed_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

double chi_square_sf(double x, double df) {
  if (!(x > 0)) return 1.0;
  const boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double t_interval_half_width(double sd, std::size_t n, double level) {
  if (n < 2) return std::nan("");
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
  return q * sd / std::sqrt(static_cast<double>(n));
}

TestResult welch_t(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() < 2 || ys.size() < 2) {
    throw DataError("welch_t: each sample needs at least 2 values");
  }
  const Moments mx = moments(xs);
  const Moments my = moments(ys);
  if (mx.var == 0 && my.var == 0) {
    throw DegenerateVarianceError("welch_t: both samples are constant");
  }
  const long double a = mx.var / static_cast<long double>(xs.size());
  const long double b = my.var / static_cast<long double>(ys.size());
  const long double diff = mx.mean - my.mean;
  TestResult r;
  r.statistic = static_cast<double>(diff / std::sqrt(a + b));
  r.df = static_cast<double>((a + b) * (a + b) /
                             (a * a / static_cast<long double>(xs.size() - 1) +
                              b * b / static_cast<long double>(ys.size() - 1)));
  r.p_raw = t_two_tailed_p(r.statistic, r.df);
  r.estimate = static_cast<double>(diff);
  r.direction = sign(r.estimate);
  r.method = "welch t";
  return r;
}

TestResult one_sample_t(std::span<const double> xs, double mu) {
  if (xs.size() < 2) throw DataError("one_sample_t: need at least 2 values");
  const Moments m = moments(xs);
  if (m.var == 0) throw DegenerateVarianceError("one_sample_t: all values are identical");
  const long double diff = m.mean - mu;
  TestResult r;
  r.statistic = static_cast<double>(
      diff / std::sqrt(m.var / static_cast<long double>(xs.size())));
  r.df = static_cast<double>(xs.size() - 1);
  r.p_raw = t_two_tailed_p(r.statistic, r.df);
  r.estimate = static_cast<double>(diff);
  r.direction = sign(r.estimate);
  r.method = "one-sample t";
  return r;
}

RimFit fit_random_intercept(std::span<const Observation> data, bool with_interaction) {
  std::unordered_map<std::string, int> group_of;
  std::vector<int> group(data.size());
  std::vector<int> group_size;
  std::uint64_t hash = 1469598103934665603ULL;
  auto mix = [&hash](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      hash ^= (v >> (8 * k)) & 0xFF;
      hash *= 1099511628211ULL;
    }
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [it, fresh] =
        group_of.emplace(data[i].frame_id, static_cast<int>(group_of.size()));
    if (fresh) group_size.push_back(0);
    group[i] = it->second;
    ++group_size[static_cast<std::size_t>(it->second)];
    mix(std::bit_cast<std::uint64_t>(data[i].value));
    mix(static_cast<std::uint64_t>(it->second));
    mix(static_cast<std::uint64_t>(condition_index(data[i].predicate, data[i].length)));
  }
  if (group_size.size() < 2) throw DataError("random-intercept model needs at least 2 frames");

  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index p = with_interaction ? 4 : 3;
  MatXd X(n, p);
  VecXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = data[static_cast<std::size_t>(i)];
    const double canon = o.predicate == PredicateType::Canonical ? 1.0 : 0.0;
    const double full = o.length == StimulusLength::FullLength ? 1.0 : 0.0;
    X(i, 0) = 1.0;
    X(i, 1) = canon;
    X(i, 2) = full;
    if (with_interaction) X(i, 3) = canon * full;
    y[i] = o.value;
  }
  if (n <= p || Eigen::ColPivHouseholderQR<MatXd>(X).rank() < p) {
    throw DataError("fixed-effect design is rank deficient (missing design cells?)");
  }

  auto at = [&](double theta) {
    return profile_log_likelihood<double>(X, y, group, group_size, theta);
  };
  auto ll_log10 = [&](double u) { return at(std::pow(10.0, u)).log_likelihood; };

  // log-spaced bracket, then golden section on log10(theta)
  constexpr double lo_u = -10.0;
  constexpr double hi_u = 6.0;
  constexpr double step = 0.5;
  double best_u = lo_u;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double u = lo_u; u <= hi_u + 1e-12; u += step) {
    const double ll = ll_log10(u);
    if (ll > best_ll) {
      best_ll = ll;
      best_u = u;
    }
  }
  double a = std::max(lo_u, best_u - step);
  double b = std::min(hi_u, best_u + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = ll_log10(c);
  double fd = ll_log10(d);
  while ((b - a) * std::log(10.0) > kRatioRelTol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = ll_log10(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = ll_log10(d);
    }
  }
  double theta = std::pow(10.0, (a + b) / 2.0);
  auto point = at(theta);
  const auto zero = at(0.0);
  if (theta <= kSingularRatio * (1.0 + 1e-6) || zero.log_likelihood >= point.log_likelihood) {
    theta = 0.0;
    point = zero;
  }

  RimFit fit;
  fit.terms = {"(Intercept)", "canonical", "full"};
  if (with_interaction) fit.terms.push_back("canonical:full");
  fit.beta = point.beta;
  fit.residual_variance = point.sigma2;
  fit.variance_ratio = theta;
  fit.intercept_variance = theta * point.sigma2;
  fit.log_likelihood = point.log_likelihood;
  fit.singular = theta < kSingularRatio;
  fit.n_obs = data.size();
  fit.n_groups = group_size.size();
  fit.data_hash = hash;
  if (!std::isfinite(fit.log_likelihood)) {
    throw DegenerateVarianceError("random-intercept fit: residual variance is zero");
  }
  return fit;
}

TestResult likelihood_ratio_test(const RimFit& null_fit, const RimFit& alt_fit) {
  if (null_fit.data_hash != alt_fit.data_hash || null_fit.n_obs != alt_fit.n_obs) {
    throw DataError("likelihood_ratio_test: fits were made on different data");
  }
  if (alt_fit.terms.size() != null_fit.terms.size() + 1) {
    throw DataError("likelihood_ratio_test: models are not nested by one term");
  }
  std::size_t extra = alt_fit.terms.size();
  for (std::size_t i = 0; i < alt_fit.terms.size(); ++i) {
    if (std::find(null_fit.terms.begin(), null_fit.terms.end(), alt_fit.terms[i]) ==
        null_fit.terms.end()) {
      if (extra != alt_fit.terms.size()) {
        throw DataError("likelihood_ratio_test: models are not nested");
      }
      extra = i;
    }
  }
  if (extra == alt_fit.terms.size()) {
    throw DataError("likelihood_ratio_test: models are not nested");
  }
  TestResult r;
  r.statistic = std::max(0.0, 2.0 * (alt_fit.log_likelihood - null_fit.log_likelihood));
  r.df = 1.0;
  r.p_raw = chi_square_sf(r.statistic, 1.0);
  r.estimate = alt_fit.beta[static_cast<Eigen::Index>(extra)];
  r.direction = sign(r.estimate);
  r.method = "likelihood ratio chi2";
  return r;
}

TestResult diff_of_diff_test(std::span<const Observation> data) {
  std::map<std::string, std::array<std::optional<double>, 4>> cells;
  std::vector<std::string> order;
  for (const auto& o : data) {
    auto [it, fresh] = cells.try_emplace(o.frame_id);
    if (fresh) order.push_back(o.frame_id);
    auto& slot = it->second[static_cast<std::size_t>(condition_index(o.predicate, o.length))];
    if (slot) {
      throw DataError("diff_of_diff_test: frame '" + o.frame_id + "' has a repeated cell (" +
                      std::string(to_string(o.predicate)) + "/" +
                      std::string(to_string(o.length)) + ")");
    }
    slot = o.value;
  }
  std::vector<double> d;
  d.reserve(order.size());
  for (const auto& id : order) {
    const auto& c = cells.at(id);
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (!c[k]) {
        throw DataError("diff_of_diff_test: frame '" + id + "' is missing cell " +
                        std::string(to_string(kConditions[k].predicate)) + "/" +
                        std::string(to_string(kConditions[k].length)));
      }
    }
    // kConditions order: canon/full, canon/sent, noncanon/full, noncanon/sent
    d.push_back((*c[0] - *c[2]) - (*c[1] - *c[3]));
  }
  TestResult r = one_sample_t(d, 0.0);
  r.method = "difference of differences t";
  return r;
}

std::vector<double> fdr_adjust(std::span<const double> p_values, FdrMethod method) {
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DataError("fdr_adjust: p-value outside [0, 1]");
    }
  }
  const std::size_t m = p_values.size();
  std::vector<double> out(m);
  if (m == 0) return out;
  double harmonic = 1.0;
  if (method == FdrMethod::BY) {
    harmonic = 0.0;
    for (std::size_t i = 1; i <= m; ++i) harmonic += 1.0 / static_cast<double>(i);
  }
  const double scale = static_cast<double>(m) * harmonic;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  double running = 1.0;
  for (std::size_t pos = m; pos-- > 0;) {
    const double rank = static_cast<double>(pos + 1);
    running = std::min(running, std::min(1.0, p_values[order[pos]] * (scale / rank)));
    out[order[pos]] = running;
  }
  return out;
}

}  // namespace ctxscore
