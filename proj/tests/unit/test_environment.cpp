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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "heattracer/environment.hpp"
#include "heattracer/errors.hpp"
#include "heattracer/stats.hpp"

namespace heattracer {
namespace {

constexpr double kPi = std::numbers::pi;

double gauss(double t, double x) { return std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * kPi * t); }

// Image sum of the line kernel and its second derivative.
double wrapped(double t, double x, double period, bool second_derivative) {
  double sum = 0.0;
  for (int n = -50; n <= 50; ++n) {
    const double y = x + n * period;
    const double g = gauss(t, y);
    sum += second_derivative ? g * (y * y / (4.0 * t * t) - 1.0 / (2.0 * t)) : g;
  }
  return sum;
}

TEST(HeatKernel, ValueAtOrigin) {
  EXPECT_NEAR(heat_kernel(1.0, 0.0), 1.0 / std::sqrt(4.0 * kPi), 1e-15);
  EXPECT_NEAR(heat_kernel(1.0, 0.0), 0.2820948, 1e-7);
  EXPECT_EQ(heat_kernel(1.0, 0.0, 1), 0.0);
}

TEST(HeatKernel, SecondDerivativeMatchesFiniteDifferences) {
  const double expected = -1.0 / (4.0 * std::sqrt(8.0 * kPi));
  EXPECT_NEAR(heat_kernel(2.0, 0.0, 2), expected, 1e-15);
  EXPECT_NEAR(expected, -0.0498677, 1e-7);
  const double h = 1e-3;
  for (double x : {0.0, 0.3, -1.7}) {
    const double fd = (heat_kernel(2.0, x + h) - 2.0 * heat_kernel(2.0, x) + heat_kernel(2.0, x - h)) / (h * h);
    EXPECT_NEAR(heat_kernel(2.0, x, 2), fd, 1e-7);
  }
}

TEST(HeatKernel, SolvesHeatEquation) {
  const double h = 1e-5;
  for (double t : {0.1, 1.0, 7.0}) {
    for (double x : {0.0, 0.5, -2.0}) {
      const double dt = (heat_kernel(t + h, x) - heat_kernel(t - h, x)) / (2.0 * h);
      EXPECT_NEAR(dt, heat_kernel(t, x, 2), 1e-7 * (1.0 + std::abs(dt)));
    }
  }
}

TEST(HeatKernel, FourthDerivativeIsDerivativeOfSecond) {
  const double h = 1e-3;
  const double x = 0.4;
  const double fd = (heat_kernel(1.0, x + h, 2) - 2.0 * heat_kernel(1.0, x, 2) + heat_kernel(1.0, x - h, 2)) / (h * h);
  EXPECT_NEAR(heat_kernel(1.0, x, 4), fd, 1e-6);
}

TEST(HeatKernel, RejectsNonPositiveTime) {
  EXPECT_THROW(heat_kernel(0.0, 0.0), std::domain_error);
  EXPECT_THROW(heat_kernel(-1.0, 0.0), std::domain_error);
}

TEST(Covariance, LineValues) {
  EXPECT_NEAR(covariance({{1.0, 0.0}, {1.0, 0.0}, PairOrder::kUU}), 1.0 / std::sqrt(8.0 * kPi), 1e-15);
  EXPECT_NEAR(covariance({{1.0, 0.0}, {1.0, 0.0}, PairOrder::kUU}), 0.1994711, 1e-7);
  EXPECT_NEAR(covariance({{1.0, 0.0}, {1.0, 0.0}, PairOrder::kDxuDxu}), 0.0498677, 1e-7);
  EXPECT_NEAR(covariance({{1.0, 0.0}, {1.0, 0.0}, PairOrder::kDtuDtu}), heat_kernel(2.0, 0.0, 4), 1e-15);
}

TEST(Covariance, PeriodizedIsPeriodic) {
  const Periodization p{10.0, false};
  const double a = covariance({{1.0, 0.0}, {1.0, 10.0}, PairOrder::kUU}, p);
  const double b = covariance({{1.0, 0.0}, {1.0, 0.0}, PairOrder::kUU}, p);
  EXPECT_NEAR(a, b, 1e-15);
}

TEST(Covariance, PeriodizedMatchesImageSum) {
  const double period = 6.0;
  for (double dx : {0.0, 1.3, 2.9}) {
    EXPECT_NEAR(covariance({{1.5, 0.0}, {2.5, dx}, PairOrder::kUU}, Periodization{period, false}),
                wrapped(4.0, dx, period, false), 1e-13);
    EXPECT_NEAR(covariance({{1.5, 0.0}, {2.5, dx}, PairOrder::kDxuDxu}, Periodization{period, false}),
                -wrapped(4.0, dx, period, true), 1e-13);
  }
}

TEST(Covariance, ZeroMeanRemovesTheZeroMode) {
  const double period = 6.0;
  const double full = covariance({{1.0, 0.0}, {1.0, 0.0}, PairOrder::kUU}, Periodization{period, false});
  const double centered = covariance({{1.0, 0.0}, {1.0, 0.0}, PairOrder::kUU}, Periodization{period, true});
  EXPECT_NEAR(full - centered, 1.0 / period, 1e-13);
}

TEST(Environment, RejectsBadSpecs) {
  EnvironmentSpec s;
  s.mode_count = 255;
  EXPECT_THROW(sample_environment(s), ConfigError);
  s.mode_count = 256;
  s.domain_length = 0.0;
  EXPECT_THROW(sample_environment(s), ConfigError);
}

TEST(Environment, DeterministicPerSeed) {
  EnvironmentSpec s;
  s.seed = 42;
  const Environment a = sample_environment(s);
  const Environment b = sample_environment(s);
  for (double x : {-3.0, 0.0, 0.25, 11.0}) {
    EXPECT_EQ(a.value(1.0, x), b.value(1.0, x));
    EXPECT_EQ(a.eval_u(0.5, x, 2), b.eval_u(0.5, x, 2));
  }
  s.seed = 43;
  EXPECT_NE(a.value(1.0, 0.0), sample_environment(s).value(1.0, 0.0));
}

TEST(Environment, VarianceMatchesCovariance) {
  EnvironmentSpec s;
  s.domain_length = 50.0;
  s.mode_count = 256;
  std::vector<double> v;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    s.seed = 1000 + i;
    v.push_back(sample_environment(s).value(1.0, 0.0));
  }
  const MeanEstimate m = second_moment(v);
  const double expected = covariance({{1.0, 0.0}, {1.0, 0.0}, PairOrder::kUU}, Periodization{50.0, false});
  EXPECT_NEAR(expected, 0.19947, 1e-4);
  EXPECT_LT(std::abs(m.mean - expected), 3.0 * m.se);
}

TEST(Environment, SpatialMeanVanishesWithoutZeroMode) {
  EnvironmentSpec s;
  s.zero_mode = ZeroMode::kExcluded;
  s.seed = 9;
  const Environment env = sample_environment(s);
  std::vector<double> xs(s.mode_count);
  for (int i = 0; i < s.mode_count; ++i) xs[i] = i * s.lattice_spacing();
  for (double t : {0.1, 1.0}) {
    double sum = 0.0, scale = 0.0;
    for (double u : env.values(t, xs)) {
      sum += u;
      scale += std::abs(u);
    }
    EXPECT_LT(std::abs(sum), 1e-13 * scale);
  }
}

TEST(Environment, SpatialMeanIsZeroModeWhenIncluded) {
  EnvironmentSpec s;
  s.seed = 9;
  const Environment env = sample_environment(s);
  std::vector<double> xs(s.mode_count);
  for (int i = 0; i < s.mode_count; ++i) xs[i] = i * s.lattice_spacing();
  double sum = 0.0;
  for (double u : env.values(1.0, xs)) sum += u;
  EXPECT_NEAR(sum / s.mode_count, env.zero_mode_value(), 1e-13);
}

TEST(Environment, Periodic) {
  EnvironmentSpec s;
  s.seed = 3;
  const Environment env = sample_environment(s);
  for (double x : {0.0, 1.234, -7.5}) {
    for (int d = 0; d <= 2; ++d) {
      EXPECT_NEAR(env.eval_u(1.0, x, d), env.eval_u(1.0, x + s.domain_length, d), 1e-13);
    }
  }
}

TEST(Environment, HeatIdentity) {
  EnvironmentSpec s;
  s.seed = 5;
  const Environment env = sample_environment(s);
  const double floor = s.time_floor();
  for (double t : {2.0 * floor, 0.3, 1.0}) {
    const double h = 1e-4 * t;
    for (double x : {0.0, 2.5, -13.0}) {
      const double fd = (env.value(t + h, x) - env.value(t - h, x)) / (2.0 * h);
      const double uxx = env.eval_u(t, x, 2);
      EXPECT_LE(std::abs(fd - uxx), 1e-5 * (1.0 + std::abs(uxx)));
      if (t == 1.0) EXPECT_LE(std::abs(fd - uxx), 1e-6 * (1.0 + std::abs(uxx)));
    }
  }
}

TEST(Environment, JetsAgreeWithPointwiseEvaluation) {
  EnvironmentSpec s;
  s.seed = 6;
  const Environment env = sample_environment(s);
  const std::vector<double> xs{-3.0, 0.0, 0.7, 20.0};
  const auto jets = env.jets(0.5, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_NEAR(jets[i].u, env.eval_u(0.5, xs[i], 0), 1e-12);
    EXPECT_NEAR(jets[i].ux, env.eval_u(0.5, xs[i], 1), 1e-12);
    EXPECT_NEAR(jets[i].uxx, env.eval_u(0.5, xs[i], 2), 1e-12);
  }
}

TEST(Environment, BelowFloorIsPrecisionError) {
  EnvironmentSpec s;
  const Environment env = sample_environment(s);
  EXPECT_THROW(env.value(0.5 * s.time_floor(), 0.0), PrecisionError);
  EXPECT_NO_THROW(env.value(s.time_floor(), 0.0));
}

TEST(Environment, CorrelationDecayMatchesKernel) {
  EnvironmentSpec s;
  s.domain_length = 20.0;
  s.mode_count = 128;
  const std::vector<double> xs{0.0, 0.5, 1.0, 2.0, 4.0};
  std::vector<std::vector<double>> prods(xs.size());
  for (std::uint64_t i = 0; i < 4000; ++i) {
    s.seed = 50000 + i;
    const auto v = sample_environment(s).values(0.5, xs);
    for (std::size_t j = 0; j < xs.size(); ++j) prods[j].push_back(v[0] * v[j]);
  }
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const MeanEstimate m = mean_estimate(prods[j]);
    EXPECT_LT(std::abs(m.mean - wrapped(1.0, xs[j], 20.0, false)), 4.0 * m.se) << "dx = " << xs[j];
  }
}

TEST(ExactGauss, SinglePointVariance) {
  const SpaceTimePoint p{1.0, 0.0};
  std::vector<double> v;
  for (std::uint64_t i = 0; i < 100000; ++i) v.push_back(exact_gauss_sample({&p, 1}, i).values[0]);
  const MeanEstimate m = second_moment(v);
  EXPECT_LT(std::abs(m.mean - 1.0 / std::sqrt(8.0 * kPi)), 3.0 * m.se);
}

TEST(ExactGauss, IdenticalPointsGiveIdenticalValues) {
  const std::vector<SpaceTimePoint> pts{{1.0, 0.5}, {1.0, 0.5}};
  for (std::uint64_t i = 0; i < 20; ++i) {
    const GaussSample g = exact_gauss_sample(pts, i);
    EXPECT_NEAR(g.values[0], g.values[1], 1e-5);
  }
}

TEST(ExactGauss, DistantPointsUncorrelated) {
  const std::vector<SpaceTimePoint> pts{{1.0, 0.0}, {1.0, 40.0}};
  std::vector<double> a, b;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    const GaussSample g = exact_gauss_sample(pts, i);
    a.push_back(g.values[0]);
    b.push_back(g.values[1]);
  }
  const MeanEstimate m = product_moment(a, b);
  EXPECT_LT(std::abs(m.mean), 3.0 * m.se);
}

TEST(ExactGauss, MatchesSpectralBackendInLaw) {
  EnvironmentSpec s;
  s.domain_length = 50.0;
  s.mode_count = 256;
  const SpaceTimePoint p{1.0, 0.0};
  std::vector<double> spectral, exact;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    s.seed = 70000 + i;
    spectral.push_back(sample_points(s, {&p, 1})[0]);
    exact.push_back(exact_gauss_sample({&p, 1}, 90000 + i).values[0]);
  }
  EXPECT_GT(ks_two_sample(spectral, exact).p_value, 0.01);
}

TEST(ScalingView, IdentityAndSubstitution) {
  EnvironmentSpec s;
  s.seed = 8;
  const Environment env = sample_environment(s);
  const ScaledField one = scaling_view(env, 1.0);
  EXPECT_EQ(one.value(1.0, 0.3), env.value(1.0, 0.3));
  const ScaledField four = scaling_view(env, 4.0);
  EXPECT_NEAR(four.value(1.0, 1.0), std::sqrt(2.0) * env.value(4.0, 2.0), 1e-14);
  EXPECT_THROW(scaling_view(env, 0.0), std::domain_error);
}

TEST(ScalingView, SameLawAsFreshEnvironment) {
  EnvironmentSpec s;
  s.domain_length = 50.0;
  s.mode_count = 256;
  for (double alpha : {0.25, 4.0}) {
    std::vector<double> scaled, fresh;
    for (std::uint64_t i = 0; i < 3000; ++i) {
      s.seed = 11000 + i;
      const Environment a = sample_environment(s);
      scaled.push_back(scaling_view(a, alpha).value(1.0, 0.0));
      s.seed = 21000 + i;
      fresh.push_back(sample_environment(s).value(1.0, 0.0));
    }
    EXPECT_GT(ks_two_sample(scaled, fresh).p_value, 0.01) << "alpha = " << alpha;
  }
}

// Mean over environments of sup t^{p+ε}|∂^d u| on a (t, x) grid, for a grid
// and its 2x refinement.
std::pair<double, double> weighted_sup(int d, double power) {
  EnvironmentSpec s;
  s.domain_length = 10.0;
  s.mode_count = 1024;
  const double t_lo = 2.0 * s.time_floor();
  auto grid_sup = [&](const Environment& env, int nt, int nx) {
    double sup = 0.0;
    for (int i = 0; i < nt; ++i) {
      const double t = t_lo * std::pow(1.0 / t_lo, static_cast<double>(i) / (nt - 1));
      for (int j = 0; j < nx; ++j) {
        const double x = -1.0 + 2.0 * j / (nx - 1);
        sup = std::max(sup, std::pow(t, power) * std::abs(env.eval_u(t, x, d)));
      }
    }
    return sup;
  };
  double coarse = 0.0, fine = 0.0;
  const int n = 40;
  for (int k = 0; k < n; ++k) {
    s.seed = 500 + k;
    const Environment env = sample_environment(s);
    coarse += grid_sup(env, 20, 21) / n;
    fine += grid_sup(env, 39, 41) / n;
  }
  return {coarse, fine};
}

TEST(Environment, WeightedSupremaStableUnderRefinement) {
  const auto [c0, f0] = weighted_sup(0, 0.25 + 0.1);
  EXPECT_TRUE(std::isfinite(f0));
  EXPECT_LT(f0, 1.1 * c0);
  const auto [c1, f1] = weighted_sup(1, 0.75 + 0.1);
  EXPECT_TRUE(std::isfinite(f1));
  EXPECT_LT(f1, 1.1 * c1);
}

TEST(DeriveSeed, DistinctAndStable) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

}  // namespace
}  // namespace heattracer
