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

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heattracer/field.hpp"

namespace heattracer {

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = 1e300;
  /// Handoff time is t_init_factor * t_floor of the field.
  double t_init_factor = 10.0;
  /// Handoff time used when the field has no floor.
  double min_init_time = 1e-9;
  /// Also bound |X'(t) - u(t, X(t))| of the cubic dense output.
  bool control_dense_residual = true;
  long max_steps = 2'000'000;

  void validate() const;
};

/// Accepted steps of a scalar trajectory with cubic Hermite dense output.
class TracerPath {
 public:
  TracerPath() = default;

  void append(double t, double x, double velocity);

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& positions() const { return positions_; }
  const std::vector<double>& velocities() const { return velocities_; }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }

  double t_init() const { return t_init_; }
  void set_t_init(double t) { t_init_ = t; }

  double front_time() const { return times_.front(); }
  double back_time() const { return times_.back(); }
  double back_position() const { return positions_.back(); }

  /// Position at t by cubic Hermite interpolation between accepted steps.
  double at(double t) const;
  /// Derivative of the interpolant at t.
  double derivative_at(double t) const;

  std::vector<double> sample(std::span<const double> grid) const;

 private:
  std::size_t segment(double t) const;

  std::vector<double> times_;
  std::vector<double> positions_;
  std::vector<double> velocities_;
  double t_init_ = 0.0;
};

struct TracerResult {
  TracerPath path;
  /// Set when integration stopped early; path then holds the partial solution.
  std::optional<std::string> error;
  long accepted_steps = 0;
  long rejected_steps = 0;

  bool ok() const { return !error.has_value(); }
};

using ScalarRhs = std::function<double(double, double)>;

/// Embedded Dormand-Prince 5(4) with PI step control for x' = rhs(t, x).
TracerResult integrate_ode(const ScalarRhs& rhs, double x_start,
                           double t_start, double t_end,
                           const IntegratorConfig& cfg);

/// Integrates X' = u(t, X) from (t_start, x_start) to t_end.
TracerResult integrate_tracer(const VelocityField& field, double x_start,
                              double t_start, double t_end,
                              const IntegratorConfig& cfg);

struct ShortTimeFunctional {
  std::vector<double> theta_grid;
  std::vector<double> values;
  /// Scale T if the values are T^{-3/4} ∫_0^{θT} u(s, 0) ds.
  std::optional<double> scale;
  /// Part of the integral below the field's time floor was computed from the
  /// unresolved (extrapolated) field.
  bool extrapolated_below_floor = false;
};

/// ∫_0^θ u(s, x) ds on an increasing θ grid, by Gauss-Legendre panels that
/// are geometrically graded toward s = 0 under the substitution s = τ⁴.
/// With `scale` set, returns T^{-3/4} ∫_0^{θT} u(s, x) ds instead.
ShortTimeFunctional short_time_functional(const VelocityField& field,
                                          std::span<const double> theta_grid,
                                          std::optional<double> scale = {},
                                          double x = 0.0);

struct TracerStart {
  double t_init = 0.0;
  double x_init = 0.0;
  bool extrapolated = false;
};

/// X_{t_init} ≈ ∫_0^{t_init} u(s, 0) ds with t_init = t_init_factor * t_floor.
TracerStart init_tracer(const VelocityField& field,
                        const IntegratorConfig& cfg);

/// init_tracer followed by integrate_tracer up to t_end.
TracerResult run_tracer(const VelocityField& field, double t_end,
                        const IntegratorConfig& cfg);

}  // namespace heattracer
