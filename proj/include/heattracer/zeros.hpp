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

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "heattracer/cadlag.hpp"
#include "heattracer/field.hpp"

namespace heattracer {

enum class ZeroKind { kStable, kUnstable, kNeutral };

const char* to_string(ZeroKind kind);

struct ZeroPoint {
  double t = 0.0;
  double x = 0.0;
  ZeroKind kind = ZeroKind::kNeutral;
  double slope = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

struct ZeroTolerances {
  double zero_tol = 0.0;
  double slope_tol = 0.0;
};

/// zero_tol = zero_rel * std(u(t, ·)) and slope_tol = slope_rel *
/// std(∂x u(t, ·)), with the standard deviations taken over a uniform grid.
ZeroTolerances zero_tolerances(const VelocityField& field, double t,
                               Interval interval, int n_samples = 512,
                               double zero_rel = 1e-9, double slope_rel = 1e-6);

ZeroKind classify(double slope, double slope_tol);

/// Zeros of u(t, ·) on the interval, sorted by position. Cells of the scan
/// where ∂x u changes sign are rescanned at 4x density before refinement.
/// If the field is periodic and the interval spans one period, the interval
/// is treated as half-open.
std::vector<ZeroPoint> find_zeros(const VelocityField& field, double t,
                                  Interval interval, int n_scan,
                                  std::optional<ZeroTolerances> tol = {});

/// Scan size giving cells no wider than sqrt(t) / density.
int scan_points(double t, Interval interval, double density = 8.0);

/// A zero of u followed through time. Positions are not wrapped.
struct ZeroCurve {
  std::int64_t id = -1;
  ZeroKind kind = ZeroKind::kNeutral;
  int origin_sign = 0;
  std::vector<double> times;
  std::vector<double> positions;
  /// Annihilation time, if the curve was annihilated.
  std::optional<double> death_time;
  /// The curve left a non-periodic tracking window.
  bool exited = false;

  double position_at(double t) const;
};

struct TraceConfig {
  /// Step is at most this fraction of the current time.
  double max_step_fraction = 0.05;
  double initial_step_fraction = 0.01;
  int newton_iterations = 20;
  std::optional<ZeroTolerances> tol;
};

struct TraceResult {
  ZeroCurve curve;
  std::optional<std::string> error;
  bool ok() const { return !error.has_value(); }
};

/// Continues the zero z backward in time to s_target by predictor steps
/// along ∂s r = -∂xx u / ∂x u and Newton correction on u(s, ·) = 0.
/// Samples are returned in increasing time.
TraceResult trace_zero(const VelocityField& field, const ZeroPoint& z,
                       double s_target, const TraceConfig& cfg = {});

struct AnnihilationEvent {
  double t = 0.0;
  double x = 0.0;
  std::int64_t stable_id = -1;
  std::int64_t unstable_id = -1;
};

struct AliveZero {
  std::int64_t id = -1;
  double x = 0.0;
  ZeroKind kind = ZeroKind::kNeutral;
  int origin_sign = 0;
};

struct ZeroSnapshot {
  double t = 0.0;
  std::vector<AliveZero> alive;  // sorted by position
  /// Number of zeros found by a fresh scan, on a periodic domain.
  std::optional<int> rescan_count;
};

struct Frontier {
  double t = 0.0;
  double L = 0.0;
  double R = 0.0;
  double Z = 0.0;
  ZeroKind L_kind = ZeroKind::kNeutral;
  ZeroKind R_kind = ZeroKind::kNeutral;
  std::int64_t L_id = -1;
  std::int64_t R_id = -1;
  std::int64_t Z_id = -1;
};

/// L is the rightmost zero with negative origin, R the leftmost with positive
/// origin, Z the stable one of the two. Throws FrontierError if a side is
/// empty or L and R have the same kind.
Frontier frontier(const std::vector<AliveZero>& alive, double t);

struct TrackConfig {
  double t_min = 0.0;
  double t_max = 1.0;
  /// Times at which the alive set is stored (and recounted on a torus).
  std::vector<double> checkpoints;
  double step_fraction = 0.05;
  double scan_density = 8.0;
  double zero_rel = 1e-9;
  double slope_rel = 1e-6;
  int newton_iterations = 25;
  /// Number of samples added on each side of an annihilation.
  int graded_samples = 10;
  bool record_frontier = true;
  /// Recompute the kinds of L and R from a fresh ∂x u at every step.
  bool audit_frontier = true;
};

struct FrontierRecord {
  Frontier frontier;
  bool valid = false;
  /// Fresh ∂x u at L and R gave the same kind.
  bool alternative_violated = false;
};

struct TrackResult {
  std::vector<ZeroCurve> curves;  // indexed by id
  std::vector<AnnihilationEvent> events;
  std::vector<ZeroSnapshot> snapshots;
  std::vector<FrontierRecord> frontier_history;
  /// Step lengths used, aligned with frontier_history[1..].
  std::vector<double> step_sizes;
  ZeroTolerances initial_tol;
  bool periodic = false;
  int neutral_at_start = 0;
  /// Fresh recounts that disagree with the tracked count, or increase.
  int lap_violations = 0;
  long retried_steps = 0;
  long frontier_queries = 0;
  long frontier_violations = 0;
  long frontier_invalid = 0;  // queries with no zero on one side
  double max_residual_ratio = 0.0;  // max |u| / zero_tol over samples

  std::vector<AliveZero> alive_at_checkpoint(double t) const;
};

/// Finds all zeros at t_min, labels each by the sign of its position, and
/// continues them forward to t_max with shared adaptive steps. Opposite-kind
/// neighbours that close are annihilated at the fold time, found by Newton
/// iteration on the critical value. On a non-periodic interval, curves that
/// leave the window are dropped. Throws TrackingError when a step cannot be
/// completed.
TrackResult track_zero_curves(const VelocityField& field, Interval interval,
                              const TrackConfig& cfg);

struct ZJump {
  double t = 0.0;
  double left = 0.0;
  double right = 0.0;
  std::int64_t old_id = -1;
  std::int64_t new_id = -1;
  double prev_t = 0.0;  // previous frontier record
};

struct FrontierPaths {
  CadlagPath L;
  CadlagPath R;
  CadlagPath Z;
  std::vector<ZJump> z_jumps;
};

/// L, R and Z as càdlàg paths on [start, end], following the tracked curves
/// between steps and jumping where the frontier curve changes.
FrontierPaths frontier_paths(const TrackResult& track, double start,
                             double end);

/// merge_tol = 3 sqrt(2 Δs).
inline double merge_tolerance(double step) { return 3.0 * std::sqrt(2.0 * step); }

}  // namespace heattracer
