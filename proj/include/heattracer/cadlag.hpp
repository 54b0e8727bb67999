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

#include <ostream>
#include <span>
#include <vector>

namespace heattracer {

enum class Interpolation { kPiecewiseLinear, kPiecewiseConstant };

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;
};

/// Right-continuous path on [times.front(), times.back()] given by its values
/// f(t_i) and left limits f(t_i-) at increasing breakpoints t_i. Between
/// breakpoints the path is linear from f(t_{i-1}) to f(t_i-), or constant.
class CadlagPath {
 public:
  explicit CadlagPath(Interpolation interpolation = Interpolation::kPiecewiseLinear)
      : interpolation_(interpolation) {}

  /// Continuous breakpoint. In constant mode a change of value is a jump.
  void push(double t, double value);
  /// Breakpoint with f(t-) = left and f(t) = right.
  void push_jump(double t, double left, double right);

  static CadlagPath from_samples(std::span<const double> times,
                                 std::span<const double> values,
                                 Interpolation interpolation =
                                     Interpolation::kPiecewiseLinear);

  Interpolation interpolation() const { return interpolation_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& left_limits() const { return left_limits_; }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  bool is_jump(std::size_t i) const { return left_limits_[i] != values_[i]; }
  std::vector<double> jump_times() const;

  double start() const { return times_.front(); }
  double end() const { return times_.back(); }

  double operator()(double t) const;
  double left_limit(double t) const;

  /// Values attained or approached on the window, in time order: f(start),
  /// then f(t_i-), f(t_i) for breakpoints in (start, end], then f(end).
  std::vector<double> window_vertices(TimeWindow w) const;

  void write_csv(std::ostream& os) const;

 private:
  Interpolation interpolation_;
  std::vector<double> times_;
  std::vector<double> values_;
  std::vector<double> left_limits_;
};

/// Distance from a to the segment with endpoints b and c.
double segment_distance(double a, double b, double c);

/// Window [t - δ, t + δ] clipped to the common domain of the paths.
TimeWindow clip_window(const CadlagPath& f, const CadlagPath& g, double t,
                       double delta);

/// sup |f(t1) - g(t2)| over t1, t2 in the clipped window around t.
double oscillation_v(const CadlagPath& f, const CadlagPath& g, double t,
                     double delta);

/// sup over t1 < t2 < t3 in the window of ||f(t2) - [f(t1), f(t3)]||.
double oscillation_ws(const CadlagPath& f, double t, double delta);

/// Direct O(n^3) evaluation of the same supremum; reference for tests.
double oscillation_ws_bruteforce(const CadlagPath& f, double t, double delta);

/// sup over the common domain of |f - g|.
double uniform_distance(const CadlagPath& f, const CadlagPath& g);

/// Discrete Fréchet distance, in the max norm on (t, x), between uniformly
/// refined completed graphs of f and g with at most n_param points each.
/// Bounds the M1 distance from above and does not increase with n_param.
double m1_upper_bound(const CadlagPath& f, const CadlagPath& g, int n_param);

}  // namespace heattracer
