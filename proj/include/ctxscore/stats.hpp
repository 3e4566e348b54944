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

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxscore/types.hpp"

namespace ctxscore {

struct TestResult {
  double statistic = 0.0;
  double df = 0.0;
  double p_raw = 1.0;
  std::optional<double> p_adjusted;
  double estimate = 0.0;  // effect size the direction is read from
  int direction = 0;      // sign of estimate: -1, 0, +1
  std::string method;
};

/// Two-sample, two-tailed Welch t-test of mean(xs) - mean(ys).
TestResult welch_t(std::span<const double> xs, std::span<const double> ys);

/// One-sample, two-tailed t-test of mean(xs) - mu.
TestResult one_sample_t(std::span<const double> xs, double mu = 0.0);

/// Two-tailed p-value for a t statistic.
double t_two_tailed_p(double t, double df);
/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double df);
/// Half-width of the two-sided t interval at `level` for n observations.
double t_interval_half_width(double sd, std::size_t n, double level = 0.95);

/// One row of the 2x2 design.
struct Observation {
  double value = 0.0;
  std::string frame_id;
  PredicateType predicate = PredicateType::Canonical;
  StimulusLength length = StimulusLength::FullLength;
};

/// ML fit of value ~ canonical + full [+ canonical:full] + (1 | frame).
/// Treatment coding: canonical = 1 for Canonical, full = 1 for FullLength,
/// so the interaction coefficient is the difference of canonicality
/// differences (full minus sentence).
struct RimFit {
  std::vector<std::string> terms;  // "(Intercept)", "canonical", "full"[, "canonical:full"]
  VecXd beta;
  double residual_variance = 0.0;
  double intercept_variance = 0.0;
  double variance_ratio = 0.0;  // intercept / residual
  double log_likelihood = 0.0;
  bool singular = false;
  std::size_t n_obs = 0;
  std::size_t n_groups = 0;
  std::uint64_t data_hash = 0;  // identifies the data for nesting checks
};

RimFit fit_random_intercept(std::span<const Observation> data, bool with_interaction);

/// 2 (ll_alt - ll_null) against chi-square(1). The alternative must add
/// exactly one fixed-effect term to the null, on the same data.
TestResult likelihood_ratio_test(const RimFit& null_fit, const RimFit& alt_fit);

/// Per-frame difference of differences, tested against zero. Requires each
/// frame to have exactly one value in every cell.
TestResult diff_of_diff_test(std::span<const Observation> data);

enum class FdrMethod { BH, BY };

/// Step-up adjustment; output index i corresponds to input index i.
std::vector<double> fdr_adjust(std::span<const double> p_values, FdrMethod method);

// --- numerical core, exposed for tests ----------------------------------

/// Profiled ML log-likelihood of a random-intercept model at a fixed
/// variance ratio theta, using the closed-form inverse of I + theta * J
/// within each group.
template <typename Scalar>
struct ProfilePoint {
  Scalar log_likelihood;
  VecX<Scalar> beta;
  Scalar sigma2;
};

template <typename Scalar>
ProfilePoint<Scalar> profile_log_likelihood(const MatX<Scalar>& X, const VecX<Scalar>& y,
                                            std::span<const int> group,
                                            std::span<const int> group_size, Scalar theta) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const auto groups = static_cast<Eigen::Index>(group_size.size());
  MatX<Scalar> group_x = MatX<Scalar>::Zero(groups, p);
  VecX<Scalar> group_y = VecX<Scalar>::Zero(groups);
  for (Eigen::Index i = 0; i < n; ++i) {
    group_x.row(group[i]) += X.row(i);
    group_y[group[i]] += y[i];
  }
  VecX<Scalar> shrink(groups);
  Scalar log_det = 0;
  for (Eigen::Index j = 0; j < groups; ++j) {
    shrink[j] = theta / (Scalar(1) + theta * Scalar(group_size[j]));
    log_det += std::log1p(theta * Scalar(group_size[j]));
  }
  const MatX<Scalar> xtvx =
      X.transpose() * X - group_x.transpose() * shrink.asDiagonal() * group_x;
  const VecX<Scalar> xtvy =
      X.transpose() * y - group_x.transpose() * shrink.asDiagonal() * group_y;
  const VecX<Scalar> beta = xtvx.ldlt().solve(xtvy);
  const VecX<Scalar> r = y - X * beta;
  VecX<Scalar> group_r = VecX<Scalar>::Zero(groups);
  for (Eigen::Index i = 0; i < n; ++i) group_r[group[i]] += r[i];
  const Scalar quad = r.squaredNorm() - (shrink.array() * group_r.array().square()).sum();
  const Scalar sigma2 = quad / Scalar(n);
  const Scalar two_pi = Scalar(2) * Scalar(3.14159265358979323846264338327950288L);
  const Scalar ll = -Scalar(0.5) * Scalar(n) * (std::log(two_pi * sigma2) + Scalar(1)) -
                    Scalar(0.5) * log_det;
  return {ll, beta, sigma2};
}

}  // namespace ctxscore
