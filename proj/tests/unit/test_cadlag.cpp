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
#include <random>
#include <sstream>
#include <vector>

#include "heattracer/cadlag.hpp"

namespace heattracer {
namespace {

CadlagPath constant(double c) {
  CadlagPath p;
  p.push(0.0, c);
  p.push(1.0, c);
  return p;
}

CadlagPath unit_jump(double at) {
  CadlagPath p;
  p.push(0.0, 0.0);
  p.push_jump(at, 0.0, 1.0);
  p.push(1.0, 1.0);
  return p;
}

CadlagPath random_path(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal;
  std::bernoulli_distribution jump(0.2);
  CadlagPath p;
  double x = 0.0;
  p.push(0.0, x);
  for (int i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double left = x + 0.3 * normal(rng);
    x = jump(rng) ? left + normal(rng) : left;
    if (x != left) {
      p.push_jump(t, left, x);
    } else {
      p.push(t, x);
    }
  }
  return p;
}

TEST(SegmentDistance, Examples) {
  EXPECT_EQ(segment_distance(2.0, 0.0, 1.0), 1.0);
  EXPECT_EQ(segment_distance(0.5, 0.0, 1.0), 0.0);
  EXPECT_EQ(segment_distance(-1.0, 0.0, 0.0), 1.0);
  EXPECT_EQ(segment_distance(0.5, 1.0, 0.0), 0.0);
}

TEST(CadlagPath, RightContinuousWithLeftLimits) {
  const CadlagPath p = unit_jump(0.5);
  EXPECT_EQ(p(0.25), 0.0);
  EXPECT_EQ(p(0.5), 1.0);
  EXPECT_EQ(p.left_limit(0.5), 0.0);
  EXPECT_EQ(p.jump_times(), std::vector<double>{0.5});
  EXPECT_TRUE(p.is_jump(1));
}

TEST(CadlagPath, LinearAndConstantInterpolation) {
  const std::vector<double> t{0.0, 1.0}, v{0.0, 2.0};
  EXPECT_DOUBLE_EQ(CadlagPath::from_samples(t, v)(0.5), 1.0);
  const CadlagPath c = CadlagPath::from_samples(t, v, Interpolation::kPiecewiseConstant);
  EXPECT_EQ(c(0.5), 0.0);
  EXPECT_EQ(c.left_limit(1.0), 0.0);
  EXPECT_EQ(c(1.0), 2.0);
}

TEST(CadlagPath, RejectsBadInput) {
  CadlagPath p;
  p.push(0.0, 0.0);
  EXPECT_THROW(p.push(0.0, 1.0), std::invalid_argument);
  p.push(1.0, 1.0);
  EXPECT_THROW(p(2.0), std::out_of_range);
  EXPECT_THROW(p(-0.5), std::out_of_range);
}

TEST(CadlagPath, CsvColumns) {
  std::ostringstream os;
  unit_jump(0.5).write_csv(os);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "t,value,left_limit,is_jump");
}

TEST(OscillationV, Examples) {
  EXPECT_EQ(oscillation_v(constant(3.0), constant(3.0), 0.5, 0.2), 0.0);
  EXPECT_EQ(oscillation_v(constant(0.0), unit_jump(0.5), 0.5, 0.1), 1.0);
}

TEST(OscillationV, MonotoneInDeltaAndBoundsPointwiseGap) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const CadlagPath f = random_path(rng, 30);
    const CadlagPath g = random_path(rng, 17);
    double prev = 0.0;
    for (double d : {0.0, 0.01, 0.05, 0.1, 0.3, 1.0}) {
      const double v = oscillation_v(f, g, 0.4, d);
      EXPECT_GE(v, prev);
      prev = v;
    }
    EXPECT_GE(oscillation_v(f, g, 0.4, 0.05), std::abs(f(0.4) - g(0.4)));
  }
}

TEST(OscillationWs, Examples) {
  CadlagPath mono;
  mono.push(0.0, 0.0);
  mono.push(0.3, 1.0);
  mono.push_jump(0.6, 1.0, 4.0);
  mono.push(1.0, 5.0);
  EXPECT_EQ(oscillation_ws(mono, 0.5, 0.5), 0.0);

  const std::vector<double> t{0.0, 0.5, 1.0}, v{0.0, 2.0, 1.0};
  EXPECT_GE(oscillation_ws(CadlagPath::from_samples(t, v), 0.5, 0.5), 1.0);

  const CadlagPath jump = unit_jump(0.5);
  for (double d : {0.01, 0.1, 0.5}) EXPECT_EQ(oscillation_ws(jump, 0.5, d), 0.0);
}

TEST(OscillationWs, FastPathMatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const CadlagPath f = random_path(rng, 25);
    for (double d : {0.05, 0.2, 0.6}) {
      EXPECT_NEAR(oscillation_ws(f, 0.5, d), oscillation_ws_bruteforce(f, 0.5, d), 1e-12);
    }
  }
}

TEST(OscillationWs, BoundedByLocalOscillation) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const CadlagPath f = random_path(rng, 25);
    const auto vs = f.window_vertices({0.3, 0.7});
    const double osc = *std::max_element(vs.begin(), vs.end()) - *std::min_element(vs.begin(), vs.end());
    EXPECT_LE(oscillation_ws(f, 0.5, 0.2), osc + 1e-15);
  }
}

TEST(UniformDistance, Examples) {
  std::mt19937_64 rng(4);
  const CadlagPath f = random_path(rng, 20);
  EXPECT_EQ(uniform_distance(f, f), 0.0);
  EXPECT_DOUBLE_EQ(uniform_distance(constant(0.0), constant(2.5)), 2.5);
  CadlagPath shifted;
  shifted.push(0.0, f.values()[0] + 0.7);
  for (std::size_t i = 1; i < f.size(); ++i) shifted.push_jump(f.times()[i], f.left_limits()[i] + 0.7, f.values()[i] + 0.7);
  EXPECT_NEAR(uniform_distance(f, shifted), 0.7, 1e-12);
}

TEST(UniformDistance, TriangleInequality) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    const CadlagPath a = random_path(rng, 10);
    const CadlagPath b = random_path(rng, 13);
    const CadlagPath c = random_path(rng, 7);
    EXPECT_LE(uniform_distance(a, c), uniform_distance(a, b) + uniform_distance(b, c) + 1e-12);
  }
}

TEST(M1Bound, Examples) {
  const CadlagPath j = unit_jump(0.5);
  EXPECT_NEAR(m1_upper_bound(j, j, 200), 0.0, 1e-12);
  EXPECT_NEAR(m1_upper_bound(constant(0.0), constant(1.5), 200), 1.5, 1e-12);
}

TEST(M1Bound, JumpVersusSteepRamp) {
  const CadlagPath jump = unit_jump(0.5);
  double prev = 1.0;
  for (double h : {0.1, 0.03, 0.01}) {
    CadlagPath ramp;
    ramp.push(0.0, 0.0);
    ramp.push(0.5 - h, 0.0);
    ramp.push(0.5 + h, 1.0);
    ramp.push(1.0, 1.0);
    const double b = m1_upper_bound(jump, ramp, 2000);
    EXPECT_LE(b, h + 2e-3) << "h = " << h;
    EXPECT_LT(b, prev);
    prev = b;
    // Far apart in the uniform norm.
    EXPECT_GE(uniform_distance(jump, ramp), 0.49);
  }
}

TEST(M1Bound, NonIncreasingInResolution) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 10; ++k) {
    const CadlagPath f = random_path(rng, 10);
    const CadlagPath g = random_path(rng, 10);
    double prev = INFINITY;
    for (int n : {50, 100, 200, 400}) {
      const double b = m1_upper_bound(f, g, n);
      EXPECT_GE(b, 0.0);
      EXPECT_LE(b, prev + 1e-12);
      prev = b;
    }
  }
}

}  // namespace
}  // namespace heattracer
