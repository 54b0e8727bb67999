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

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heattracer/stats.hpp"
#include "heattracer/tracer.hpp"

namespace heattracer {

/// Lattice for the stationary rough field u = -∂x V with
/// ∂t V = ∂xx V + √2 ξ on a torus of N sites with spacing Δx.
struct RoughSpec {
  int sites = 1024;
  double spacing = 0.25;
  std::uint64_t seed = 0;
  /// Modes with k above this are not simulated. Default: all up to Nyquist.
  std::optional<double> max_wavenumber;

  double length() const { return sites * spacing; }
  void validate() const;
};

/// Fourier amplitudes of u evolved by exact Ornstein-Uhlenbeck updates.
/// Mode m has wave number k = 2πm/Λ and relaxes at rate k²; its cosine and
/// sine amplitudes have unit stationary variance. The k = 0 amplitude is
/// drawn once and does not evolve.
class RoughModes {
 public:
  explicit RoughModes(const RoughSpec& spec);

  void advance(double dt);

  double time() const { return time_; }
  int mode_count() const { return static_cast<int>(cos_amp_.size()); }
  double wave_number(int m) const { return k1_ * (m + 1); }
  double base_wave_number() const { return k1_; }
  double length() const { return length_; }
  double zero_amp() const { return zero_amp_; }
  const std::vector<double>& cos_amp() const { return cos_amp_; }
  const std::vector<double>& sin_amp() const { return sin_amp_; }

  /// u at the lattice sites.
  std::vector<double> site_values() const;

 private:
  struct Engine;
  double length_;
  int sites_;
  double k1_;
  double time_ = 0.0;
  double zero_amp_ = 0.0;
  std::vector<double> cos_amp_;
  std::vector<double> sin_amp_;
  std::vector<double> decay_;
  std::vector<double> noise_;
  double cached_dt_ = -1.0;
  std::shared_ptr<Engine> engine_;
};

struct RoughTrajectory {
  RoughSpec spec;
  double interval = 0.1;
  std::vector<double> times;
  double zero_amp = 0.0;
  std::vector<std::vector<double>> cos_amp;  // [snapshot][mode]
  std::vector<std::vector<double>> sin_amp;

  std::size_t size() const { return times.size(); }
  double wave_number(int m) const;
  std::vector<double> site_values(std::size_t snapshot) const;
};

/// Snapshots at t = 0, interval, 2 interval, ... up to t_max of a field
/// started in its stationary law. Requires Δx ≤ 1/4 and N Δx ≥ 20 sqrt(t_max).
RoughTrajectory simulate_rough(const RoughSpec& spec, double t_max,
                               double interval = 0.1);

/// u_ℓ(t, ·) = P_{ℓ²} * u(t, ·): each mode scaled by exp(-k² ℓ²).
class RegularizedField {
 public:
  RegularizedField(const RoughTrajectory& traj, double ell);

  /// Regularizing again by ell2; multipliers compose mode by mode.
  RegularizedField regularize(double ell2) const;

  double ell() const { return ell_; }
  double value(std::size_t snapshot, double x) const;
  std::vector<double> values(std::size_t snapshot, std::span<const double> xs) const;
  /// Mode amplitude multiplier.
  double multiplier(int m) const { return multiplier_[m]; }

 private:
  RegularizedField(const RoughTrajectory& traj, double ell,
                   std::vector<double> multiplier);

  const RoughTrajectory* traj_;
  double ell_;
  std::vector<double> multiplier_;
};

RegularizedField regularize(const RoughTrajectory& traj, double ell);

struct SLambdaConfig {
  double lambda = 0.5;
  double t_max = 100.0;
  double ell = 1.0;
  double snapshot_interval = 0.1;
  /// Snapshots are generated this many times more finely than used.
  int substeps = 1;
  /// Modes whose multiplier exp(-k² ℓ²) falls below this are dropped.
  double mode_threshold = 1e-8;
  int taylor_order = 6;
  double recenter_radius = 0.25;
  IntegratorConfig integrator{1e-7, 1e-10, 1e300, 10.0, 1e-9, true, 2'000'000};

  void validate() const;
};

struct SLambdaPath {
  double lambda = 0.0;
  std::vector<double> times;
  std::vector<double> positions;
  std::optional<std::string> error;

  /// Linear interpolation between stored times.
  double at(double t) const;
};

/// Integrates ∂t S = λ u_ℓ(t, S) from S_0 = 0 on a field generated on the fly
/// from spec. Field values between snapshots come from Catmull-Rom
/// interpolation in time of local Taylor expansions in space.
SLambdaPath integrate_s_lambda(const RoughSpec& spec, const SLambdaConfig& cfg);

/// Torus length and mode cutoff used by integrate_s_lambda for given λ.
RoughSpec s_lambda_spec(double lambda, double t_max, std::uint64_t seed,
                        double ell = 1.0, double spacing = 0.25);

struct CrossoverConfig {
  std::vector<std::size_t> paths;  // per λ; a single entry applies to all
  std::uint64_t base_seed = 0;
  int workers = 1;
  /// t_max = t_max_factor / λ⁴.
  double t_max_factor = 25.0;
  double t_min = 0.25;
  int points_per_decade = 10;
  double min_decades = 0.5;
  double spacing = 0.25;
  SLambdaConfig path;  // lambda and t_max are overridden per λ

  void validate(std::span<const double> lambdas) const;
};

struct WindowFit {
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::optional<ExponentFit> fit;
  std::string skipped;  // reason when fit is empty
};

struct LambdaCrossover {
  double lambda = 0.0;
  double t_max = 0.0;
  std::size_t paths = 0;
  std::vector<std::pair<std::size_t, std::string>> failures;
  std::vector<double> times;
  std::vector<MeanEstimate> second_moment;
  WindowFit sub_diffusive;  // [1, λ⁻⁴/4]
  WindowFit diffusive;      // [4λ⁻⁴, t_max]
  /// E[S²]/(λ² t^{3/2}) at the top of the sub-diffusive window.
  double d_estimate = 0.0;
  double d_estimate_se = 0.0;
  double d_estimate_time = 0.0;
  /// Leading coefficient of D (t+2ℓ²)^{3/2} + b (t+2ℓ²) + c fitted over the
  /// sub-diffusive window, the exact free-motion form at smoothing ℓ.
  std::optional<double> d_free_form;
  KinkFit kink;
  /// Mean of E[S²]/t over the diffusive window.
  MeanEstimate diffusivity;
};

struct CrossoverReport {
  std::vector<LambdaCrossover> per_lambda;
  /// Largest pairwise difference of diffusivities over their combined SE.
  double collapse_z = 0.0;
};

CrossoverReport crossover_report(std::span<const double> lambdas,
                                 const CrossoverConfig& cfg);

}  // namespace heattracer
