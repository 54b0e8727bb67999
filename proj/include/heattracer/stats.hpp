/*
 * Copyright 2026 The heattracer Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "heattracer/errors.hpp"

namespace heattracer {

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Sample mean with standard error s / sqrt(n).
MeanEstimate mean_estimate(std::span<const double> values);

/// Mean of x² with its standard error.
MeanEstimate second_moment(std::span<const double> values);

/// Unbiased sample covariance and the standard error of the mean product.
MeanEstimate product_moment(std::span<const double> a, std::span<const double> b);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Kolmogorov survival function Q(λ) = 2 Σ (-1)^{j-1} exp(-2 j² λ²).
double kolmogorov_q(double lambda);

/// One-sample KS test. p-value from the asymptotic Kolmogorov law with
/// Stephens' correction (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D.
KsResult ks_one_sample(std::span<const double> samples,
                       const std::function<double(double)>& cdf);

/// Two-sample KS test with effective size n m / (n + m). Tied values are
/// consumed together before the empirical cdfs are compared, so the
/// statistic uses strict inequalities on both sides.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

double normal_cdf(double x, double variance);

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t points = 0;
};

/// Weighted least squares of log m on log t. Standard errors come from the
/// fit covariance scaled by the residual variance; the interval uses
/// Student t with n - 2 degrees of freedom.
ExponentFit fit_exponent(std::span<const double> t, std::span<const double> m,
                         std::span<const double> weights = {},
                         double confidence = 0.95, double min_decades = 1.0);

struct TailFit {
  double rate = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double z_lo = 0.0;
  double z_hi = 0.0;
  std::size_t tail_count = 0;
};

/// Least squares of log P(X >= z) = intercept - rate z on a grid of
/// grid_points values in [z_lo, z_hi]. Throws FitError if fewer than
/// min_tail samples are at or beyond z_hi.
TailFit tail_fit(std::span<const double> samples, double z_lo, double z_hi,
                 int grid_points = 50, std::size_t min_tail = 100);

/// Largest z with at least min_tail samples at or beyond it.
double tail_limit(std::span<const double> samples, std::size_t min_tail = 100);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> density;  // normalized to unit mass
  double max_height = 0.0;
  double max_height_doubled = 0.0;
  /// Max height with 2 * bins divided by max height with bins.
  double doubling_ratio = 0.0;
};

Histogram density_histogram(std::span<const double> samples, int bins = 50);

struct KinkFit {
  double t_kink = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

/// Continuous broken power law with fixed slopes before and after t_kink,
/// fitted by least squares on log scales with a grid search over t_kink.
KinkFit fit_kink(std::span<const double> t, std::span<const double> m,
                 double slope_before, double slope_after,
                 std::span<const double> weights = {});

struct EnsembleOptions {
  std::size_t n_env = 1;
  std::uint64_t base_seed = 0;
  int workers = 1;
  double failure_budget = 0.02;
};

template <class Result>
struct EnsembleOutcome {
  /// Indexed by environment; empty where the run failed.
  std::vector<std::optional<Result>> results;
  std::vector<std::pair<std::size_t, std::string>> failures;

  std::vector<Result> successes() const {
    std::vector<Result> out;
    for (const auto& r : results) {
      if (r) out.push_back(*r);
    }
    return out;
  }
};

/// Calls fn(index, seed) with seed = base_seed + index for every index in
/// [0, n_env). Results are stored by index, so the outcome does not depend
/// on the number of workers. Throws NumericalError when the share of failed
/// environments exceeds the budget.
template <class Fn>
auto run_ensemble(const EnsembleOptions& opt, Fn fn)
    -> EnsembleOutcome<decltype(fn(std::size_t{}, std::uint64_t{}))> {
  using Result = decltype(fn(std::size_t{}, std::uint64_t{}));
  EnsembleOutcome<Result> out;
  out.results.resize(opt.n_env);
  std::vector<std::string> errors(opt.n_env);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= opt.n_env) return;
      try {
        out.results[i] = fn(i, opt.base_seed + i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown failure";
      }
    }
  };
  const int workers = std::max(1, opt.workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < opt.n_env; ++i) {
    if (!out.results[i]) out.failures.emplace_back(i, errors[i]);
  }
  if (static_cast<double>(out.failures.size()) >
      opt.failure_budget * static_cast<double>(opt.n_env)) {
    throw NumericalError("ensemble aborted: " + std::to_string(out.failures.size()) +
                         " of " + std::to_string(opt.n_env) +
                         " environments failed; first: " + out.failures.front().second);
  }
  return out;
}

}  // namespace heattracer
