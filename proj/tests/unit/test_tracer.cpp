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

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "heattracer/environment.hpp"
#include "heattracer/errors.hpp"
#include "heattracer/stats.hpp"
#include "heattracer/tracer.hpp"

namespace heattracer {
namespace {

Environment env_with_seed(std::uint64_t seed, double length = 50.0, int modes = 1024) {
  EnvironmentSpec s;
  s.domain_length = length;
  s.mode_count = modes;
  s.seed = seed;
  return sample_environment(s);
}

TEST(Tracer, ZeroFieldKeepsPosition) {
  const AnalyticField zero([](double, double) { return FieldJet{}; });
  const TracerResult r = integrate_tracer(zero, 0.7, 0.0, 5.0, IntegratorConfig{});
  ASSERT_TRUE(r.ok());
  for (double x : r.path.positions()) EXPECT_EQ(x, 0.7);
}

TEST(Tracer, LinearFieldDecaysExponentially) {
  const AnalyticField field([](double, double x) { return FieldJet{-x, -1.0, 0.0}; });
  const TracerResult r = integrate_tracer(field, 1.0, 0.0, 1.0, IntegratorConfig{});
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.path.back_position(), std::exp(-1.0), 1e-7);
  EXPECT_NEAR(r.path.at(0.5), std::exp(-0.5), 1e-7);
}

TEST(Tracer, StaysBetweenBarriers) {
  const AnalyticField field([](double t, double x) {
    return FieldJet{-x + 0.5 * std::sin(7.0 * t), -1.0, 0.0};
  });
  const TracerResult r = integrate_tracer(field, 0.9, 0.0, 20.0, IntegratorConfig{});
  ASSERT_TRUE(r.ok());
  for (double x : r.path.positions()) {
    EXPECT_GT(x, -1.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(Tracer, SelfConvergence) {
  const Environment env = env_with_seed(17);
  IntegratorConfig loose;
  loose.rel_tol = 1e-6;
  loose.abs_tol = 1e-8;
  IntegratorConfig tight;
  tight.rel_tol = 1e-9;
  tight.abs_tol = 1e-11;
  const TracerResult a = integrate_tracer(env, 0.0, 0.1, 1.0, loose);
  const TracerResult b = integrate_tracer(env, 0.0, 0.1, 1.0, tight);
  ASSERT_TRUE(a.ok());
  ASSERT_TRUE(b.ok());
  EXPECT_LE(std::abs(a.path.back_position() - b.path.back_position()), 1e-4);
}

TEST(Tracer, DenseOutputSolvesTheOde) {
  const Environment env = env_with_seed(18);
  const IntegratorConfig cfg;
  const TracerResult r = integrate_tracer(env, 0.0, 0.05, 2.0, cfg);
  ASSERT_TRUE(r.ok());
  const auto& ts = r.path.times();
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double t = 0.5 * (ts[i] + ts[i + 1]);
    const double u = env.value(t, r.path.at(t));
    EXPECT_LE(std::abs(r.path.derivative_at(t) - u), 10.0 * cfg.rel_tol * (1.0 + std::abs(u)) + 10.0 * cfg.abs_tol)
        << "t = " << t;
  }
}

TEST(Tracer, RejectsBadTolerances) {
  IntegratorConfig cfg;
  cfg.rel_tol = 0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.rel_tol = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.rel_tol = 1e-8;
  cfg.abs_tol = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ShortTimeFunctional, ZeroThetaGivesZero) {
  const Environment env = env_with_seed(19);
  const std::vector<double> grid{0.0};
  EXPECT_EQ(short_time_functional(env, grid).values[0], 0.0);
}

TEST(ShortTimeFunctional, LinearInTheField) {
  const Environment env = env_with_seed(20);
  const AmplifiedField neg(env, -1.0);
  const AmplifiedField twice(env, 2.0);
  const std::vector<double> grid{0.5, 1.0};
  const auto a = short_time_functional(env, grid).values;
  const auto b = short_time_functional(neg, grid).values;
  const auto c = short_time_functional(twice, grid).values;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(b[i], -a[i], 1e-12 * (1.0 + std::abs(a[i])));
    EXPECT_NEAR(c[i], 2.0 * a[i], 1e-12 * (1.0 + std::abs(a[i])));
  }
}

TEST(ShortTimeFunctional, MatchesTimeIntegralOfModes) {
  const Environment env = env_with_seed(21, 20.0, 256);
  const std::vector<double> grid{0.25, 1.0};
  const auto f = short_time_functional(env, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(f.values[i], env.time_integral(0.0, grid[i]), 1e-6);
  }
}

TEST(ShortTimeFunctional, VarianceMatchesQuadrature) {
  // Var ∫_0^1 u(s, 0) ds = ∫∫ P_{s+s'}(0) ds ds' on the line.
  boost::math::quadrature::tanh_sinh<double> q;
  const double oracle = q.integrate(
      [&](double s) {
        return q.integrate([s](double r) { return 1.0 / std::sqrt(4.0 * std::numbers::pi * (s + r)); }, 0.0, 1.0);
      },
      0.0, 1.0);
  EXPECT_NEAR(oracle, 0.31159, 1e-5);
  EXPECT_NEAR(oracle, 4.0 * (2.0 * std::sqrt(2.0) - 2.0) / (3.0 * std::sqrt(4.0 * std::numbers::pi)), 1e-10);

  const std::vector<double> grid{1.0};
  std::vector<double> v;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    v.push_back(short_time_functional(env_with_seed(100000 + i, 20.0, 256), grid).values[0]);
  }
  const MeanEstimate m = second_moment(v);
  EXPECT_LT(std::abs(m.mean - oracle), 4.0 * m.se);
}

TEST(ShortTimeFunctional, RejectsLongHorizonOnSmallTorus) {
  const Environment env = env_with_seed(22, 2.0, 64);
  const std::vector<double> grid{1.0};
  EXPECT_THROW(short_time_functional(env, grid), ConfigError);
}

TEST(InitTracer, StartsNearOrigin) {
  const AnalyticField zero([](double, double) { return FieldJet{}; });
  EXPECT_EQ(init_tracer(zero, IntegratorConfig{}).x_init, 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Environment env = env_with_seed(300 + seed);
    const TracerStart s = init_tracer(env, IntegratorConfig{});
    EXPECT_LE(std::abs(s.x_init), 2.0 * std::pow(s.t_init, 0.65));
  }
}

double handoff_shift(int modes) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Environment env = env_with_seed(400 + seed, 20.0, modes);
    IntegratorConfig a;
    IntegratorConfig b;
    b.t_init_factor = 2.0 * a.t_init_factor;
    const TracerResult ra = run_tracer(env, 1.0, a);
    const TracerResult rb = run_tracer(env, 1.0, b);
    EXPECT_TRUE(ra.ok() && rb.ok());
    worst = std::max(worst, std::abs(ra.path.back_position() - rb.path.back_position()));
  }
  return worst;
}

TEST(InitTracer, HandoffTimeBarelyMovesTheEndpoint) {
  const double coarse = handoff_shift(1024);
  const double fine = handoff_shift(4096);
  EXPECT_LE(fine, 1e-3);
  EXPECT_LT(fine, 0.25 * coarse);
}

TEST(TracerPath, RunIsDeterministic) {
  const Environment env = env_with_seed(23);
  const TracerResult a = run_tracer(env, 1.0, IntegratorConfig{});
  const TracerResult b = run_tracer(env, 1.0, IntegratorConfig{});
  EXPECT_EQ(a.path.positions(), b.path.positions());
}

}  // namespace
}  // namespace heattracer
