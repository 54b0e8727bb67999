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

#include "heattracer/zeros.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "heattracer/errors.hpp"

namespace heattracer {

const char* to_string(ZeroKind kind) {
  switch (kind) {
    case ZeroKind::kStable:
      return "stable";
    case ZeroKind::kUnstable:
      return "unstable";
    case ZeroKind::kNeutral:
      return "neutral";
  }
  return "neutral";
}

ZeroKind classify(double slope, double slope_tol) {
  if (slope < -slope_tol) return ZeroKind::kStable;
  if (slope > slope_tol) return ZeroKind::kUnstable;
  return ZeroKind::kNeutral;
}

namespace {

bool full_period(const VelocityField& field, Interval interval) {
  const auto period = field.period();
  return period && std::abs(interval.length() - *period) <= 1e-12 * *period;
}

int kind_sign(ZeroKind kind) { return kind == ZeroKind::kStable ? -1 : 1; }

struct Bracketed {
  double x;
  bool converged;
};

// Root of f in [a, b] where f(a), f(b) have opposite signs; eval returns
// (f, f'). Newton steps, with bisection whenever Newton leaves the bracket
// or stalls.
template <class Eval>
Bracketed rtsafe(const Eval& eval, double a, double b, double fa, double ftol) {
  double lo = a;
  double hi = b;
  if (fa > 0.0) std::swap(lo, hi);  // f(lo) < 0 < f(hi)
  double x = 0.5 * (a + b);
  double dx_old = std::abs(b - a);
  double dx = dx_old;
  auto [f, df] = eval(x);
  for (int it = 0; it < 200; ++it) {
    if (std::abs(f) <= ftol) return {x, true};
    const bool newton_out = ((x - hi) * df - f) * ((x - lo) * df - f) > 0.0;
    if (newton_out || std::abs(2.0 * f) > std::abs(dx_old * df)) {
      dx_old = dx;
      dx = 0.5 * (hi - lo);
      x = lo + dx;
    } else {
      dx_old = dx;
      dx = f / df;
      x -= dx;
    }
    if (std::abs(dx) <= 4.0 * std::numeric_limits<double>::epsilon() *
                             std::max(1.0, std::abs(x))) {
      const auto end = eval(x);
      return {x, std::abs(end.first) <= ftol};
    }
    std::tie(f, df) = eval(x);
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
  }
  return {x, std::abs(f) <= ftol};
}

double empirical_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

ZeroTolerances zero_tolerances(const VelocityField& field, double t,
                               Interval interval, int n_samples,
                               double zero_rel, double slope_rel) {
  if (n_samples < 2 || !(interval.hi > interval.lo)) {
    throw std::invalid_argument("zero_tolerances: bad grid");
  }
  const bool cyclic = full_period(field, interval);
  const double h = interval.length() / (cyclic ? n_samples : n_samples - 1);
  std::vector<double> xs(n_samples);
  for (int i = 0; i < n_samples; ++i) xs[i] = interval.lo + i * h;
  const auto jets = field.jets(t, xs);
  std::vector<double> u(n_samples), ux(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    u[i] = jets[i].u;
    ux[i] = jets[i].ux;
  }
  const double su = empirical_std(u);
  const double sx = empirical_std(ux);
  const double tiny = std::numeric_limits<double>::min();
  return {zero_rel * std::max(su, tiny), slope_rel * std::max(sx, tiny)};
}

int scan_points(double t, Interval interval, double density) {
  const double n = std::ceil(density * interval.length() / std::sqrt(t));
  return static_cast<int>(std::clamp(n, 16.0, 1e8));
}

namespace {

class Scanner {
 public:
  Scanner(const VelocityField& field, double t, ZeroTolerances tol)
      : field_(field), t_(t), tol_(tol) {}

  void cell(double a, const FieldJet& ja, double b, const FieldJet& jb,
            int depth, std::vector<double>& roots) const {
    const bool u_change = (ja.u < 0.0 && jb.u > 0.0) || (ja.u > 0.0 && jb.u < 0.0);
    const bool ux_change =
        (ja.ux < 0.0 && jb.ux > 0.0) || (ja.ux > 0.0 && jb.ux < 0.0);
    if (u_change && ux_change && depth < 4) {
      const double xs[3] = {a + 0.25 * (b - a), a + 0.5 * (b - a), a + 0.75 * (b - a)};
      const auto js = field_.jets(t_, xs);
      const double pts[5] = {a, xs[0], xs[1], xs[2], b};
      const FieldJet jj[5] = {ja, js[0], js[1], js[2], jb};
      for (int i = 0; i < 4; ++i) {
        if (i > 0 && jj[i].u == 0.0) roots.push_back(pts[i]);
        cell(pts[i], jj[i], pts[i + 1], jj[i + 1], depth + 1, roots);
      }
      return;
    }
    if (u_change) {
      roots.push_back(root(a, b, ja.u));
      return;
    }
    if (ux_change && ja.u != 0.0 && jb.u != 0.0) {
      // A pair of roots may hide between the ends; look at the extremum.
      auto slope = [this](double x) {
        const FieldJet j = field_.jet(t_, x);
        return std::pair{j.ux, j.uxx};
      };
      const double xc = rtsafe(slope, a, b, ja.ux, 0.0).x;
      const double m = field_.jet(t_, xc).u;
      if (m == 0.0) {
        roots.push_back(xc);
      } else if ((m < 0.0) != (ja.u < 0.0)) {
        roots.push_back(root(a, xc, ja.u));
        roots.push_back(root(xc, b, m));
      }
    }
  }

  double root(double a, double b, double fa) const {
    auto eval = [this](double x) {
      const FieldJet j = field_.jet(t_, x);
      return std::pair{j.u, j.ux};
    };
    return rtsafe(eval, a, b, fa, tol_.zero_tol).x;
  }

 private:
  const VelocityField& field_;
  double t_;
  ZeroTolerances tol_;
};

}  // namespace

std::vector<ZeroPoint> find_zeros(const VelocityField& field, double t,
                                  Interval interval, int n_scan,
                                  std::optional<ZeroTolerances> tol) {
  if (n_scan < 2 || !(interval.hi > interval.lo)) {
    throw std::invalid_argument("find_zeros: need n_scan >= 2 and lo < hi");
  }
  const ZeroTolerances tl = tol ? *tol : zero_tolerances(field, t, interval);
  const bool cyclic = full_period(field, interval);
  const double h = interval.length() / n_scan;
  std::vector<double> xs(n_scan + 1);
  for (int i = 0; i <= n_scan; ++i) xs[i] = interval.lo + i * h;
  xs[n_scan] = interval.hi;
  const auto js = field.jets(t, xs);

  const Scanner scanner(field, t, tl);
  std::vector<double> roots;
  for (int i = 0; i < n_scan; ++i) {
    if (js[i].u == 0.0) roots.push_back(xs[i]);
    scanner.cell(xs[i], js[i], xs[i + 1], js[i + 1], 0, roots);
  }
  if (!cyclic && js[n_scan].u == 0.0) roots.push_back(xs[n_scan]);

  std::sort(roots.begin(), roots.end());
  std::vector<ZeroPoint> out;
  out.reserve(roots.size());
  const auto rj = field.jets(t, roots);
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (cyclic && roots[i] >= interval.hi) continue;
    if (!out.empty() && roots[i] == out.back().x) continue;
    out.push_back({t, roots[i], classify(rj[i].ux, tl.slope_tol), rj[i].ux});
  }
  return out;
}

double ZeroCurve::position_at(double t) const {
  if (times.empty() || t < times.front() || t > times.back()) {
    throw std::out_of_range("ZeroCurve: time outside the curve");
  }
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
  if (i + 1 == times.size() || t == times[i]) return positions[i];
  const double w = (t - times[i]) / (times[i + 1] - times[i]);
  return positions[i] + w * (positions[i + 1] - positions[i]);
}

namespace {

Interval local_interval(const VelocityField& field, double t, double x) {
  if (const auto period = field.period()) {
    return {x - 0.5 * *period, x + 0.5 * *period};
  }
  const double w = 8.0 * std::sqrt(t);
  return {x - w, x + w};
}

}  // namespace

TraceResult trace_zero(const VelocityField& field, const ZeroPoint& z,
                       double s_target, const TraceConfig& cfg) {
  if (z.kind == ZeroKind::kNeutral) {
    throw std::invalid_argument("trace_zero: neutral zeros cannot be traced");
  }
  if (!(s_target < z.t)) {
    throw std::invalid_argument("trace_zero: s_target must precede z.t");
  }
  if (s_target < field.time_floor()) {
    throw PrecisionError("trace_zero: s_target below the field floor");
  }
  ZeroTolerances tol = cfg.tol ? *cfg.tol
                               : zero_tolerances(field, z.t, local_interval(field, z.t, z.x));
  double tol_time = z.t;
  const int sgn = kind_sign(z.kind);

  TraceResult result;
  result.curve.kind = z.kind;
  std::vector<double> ts{z.t};
  std::vector<double> rs{z.x};
  double s = z.t;
  double r = z.x;
  FieldJet j = field.jet(s, r);
  double h = cfg.initial_step_fraction * s;

  auto finish = [&]() {
    std::reverse(ts.begin(), ts.end());
    std::reverse(rs.begin(), rs.end());
    result.curve.times = std::move(ts);
    result.curve.positions = std::move(rs);
    return result;
  };

  while (s > s_target) {
    if (!cfg.tol && s < 0.5 * tol_time) {
      tol = zero_tolerances(field, s, local_interval(field, s, r));
      tol_time = s;
    }
    h = std::min(h, cfg.max_step_fraction * s);
    if (s - h <= s_target + 1e-12 * s) h = s - s_target;
    const double s_new = (h == s - s_target) ? s_target : s - h;

    const double v0 = -j.uxx / j.ux;
    const double r1 = r - h * v0;
    const FieldJet j1 = field.jet(s_new, r1);
    const double r_pred = r - 0.5 * h * (v0 - j1.uxx / j1.ux);
    double x = r_pred;
    FieldJet jn = field.jet(s_new, x);
    bool converged = false;
    int iters = 0;
    for (; iters < cfg.newton_iterations; ++iters) {
      if (std::abs(jn.u) <= tol.zero_tol) {
        converged = true;
        break;
      }
      const double dx = jn.u / jn.ux;
      x -= dx;
      jn = field.jet(s_new, x);
      if (std::abs(dx) <= 4e-16 * std::max(1.0, std::abs(x))) {
        converged = std::abs(jn.u) <= 10.0 * tol.zero_tol;
        break;
      }
    }
    const bool same_kind = (sgn < 0) ? jn.ux < -tol.slope_tol : jn.ux > tol.slope_tol;
    const bool small_move = std::abs(x - r_pred) <= 0.1 * std::sqrt(s_new);
    if (!(converged && same_kind && small_move)) {
      h *= 0.5;
      if (h < 1e-13 * s) {
        std::ostringstream msg;
        msg << "continuation stalled at s = " << s << " (|ux| = " << std::abs(j.ux)
            << ")";
        result.error = msg.str();
        return finish();
      }
      continue;
    }
    s = s_new;
    r = x;
    j = jn;
    ts.push_back(s);
    rs.push_back(r);
    if (std::abs(j.ux) < 10.0 * tol.slope_tol) {
      h *= 0.5;
    } else if (iters <= 3) {
      h *= 1.5;
    }
  }
  return finish();
}

Frontier frontier(const std::vector<AliveZero>& alive, double t) {
  const AliveZero* left = nullptr;
  const AliveZero* right = nullptr;
  for (const AliveZero& z : alive) {
    if (z.origin_sign < 0) {
      if (!left || z.x > left->x) left = &z;
    } else {
      if (!right || z.x < right->x) right = &z;
    }
  }
  if (!left || !right) {
    throw FrontierError("frontier: no zero on one side of the origin at t = " +
                        std::to_string(t));
  }
  Frontier f;
  f.t = t;
  f.L = left->x;
  f.R = right->x;
  f.L_kind = left->kind;
  f.R_kind = right->kind;
  f.L_id = left->id;
  f.R_id = right->id;
  const bool l_stable = left->kind == ZeroKind::kStable;
  const bool r_stable = right->kind == ZeroKind::kStable;
  if (l_stable == r_stable || left->kind == ZeroKind::kNeutral ||
      right->kind == ZeroKind::kNeutral) {
    std::ostringstream msg;
    msg << "frontier: L = " << f.L << " (" << to_string(f.L_kind) << ") and R = "
        << f.R << " (" << to_string(f.R_kind) << ") at t = " << t;
    throw FrontierError(msg.str());
  }
  f.Z = l_stable ? f.L : f.R;
  f.Z_id = l_stable ? f.L_id : f.R_id;
  return f;
}

std::vector<AliveZero> TrackResult::alive_at_checkpoint(double t) const {
  for (const ZeroSnapshot& s : snapshots) {
    if (std::abs(s.t - t) <= 1e-12 * std::max(1.0, std::abs(t))) return s.alive;
  }
  throw std::out_of_range("no snapshot at the requested time");
}

namespace {

struct Live {
  std::int64_t id;
  double x;
  ZeroKind kind;
  int origin_sign;
  FieldJet jet;
};

struct Fold {
  std::size_t left;  // index into the alive vector; right is its successor
  double t;
  double x;
};

class Tracker {
 public:
  Tracker(const VelocityField& field, Interval interval, const TrackConfig& cfg)
      : field_(field), interval_(interval), cfg_(cfg) {
    result_.periodic = full_period(field, interval);
    period_ = result_.periodic ? interval.length() : 0.0;
  }

  TrackResult run();

 private:
  std::size_t pair_count() const {
    if (alive_.size() < 2) return 0;
    return result_.periodic ? alive_.size() : alive_.size() - 1;
  }
  std::size_t next(std::size_t i) const { return (i + 1) % alive_.size(); }
  double right_x(std::size_t i) const {
    const std::size_t k = next(i);
    return k == 0 ? alive_[k].x + period_ : alive_[k].x;
  }

  void start();
  std::optional<Fold> fold(std::size_t i, double t, double horizon) const;
  bool advance(double t_new, const std::vector<bool>& dying,
               std::vector<double>& xs, std::vector<FieldJet>& js);
  void bury(const Fold& f, double t_prev);
  void record(double t);
  void checkpoint(double t);
  void refresh_tolerances(double t);

  const VelocityField& field_;
  Interval interval_;
  TrackConfig cfg_;
  double period_ = 0.0;
  ZeroTolerances tol_;
  double tol_time_ = 0.0;
  std::vector<Live> alive_;
  TrackResult result_;
  std::optional<int> last_count_;
  double current_time_ = 0.0;
};

void Tracker::refresh_tolerances(double t) {
  tol_ = zero_tolerances(field_, t, interval_, 512, cfg_.zero_rel, cfg_.slope_rel);
  tol_time_ = t;
}

void Tracker::start() {
  const double t = cfg_.t_min;
  refresh_tolerances(t);
  result_.initial_tol = tol_;
  const auto zeros =
      find_zeros(field_, t, interval_, scan_points(t, interval_, cfg_.scan_density), tol_);
  for (const ZeroPoint& z : zeros) {
    Live c;
    c.id = static_cast<std::int64_t>(result_.curves.size());
    c.x = z.x;
    c.kind = z.kind;
    if (c.kind == ZeroKind::kNeutral) {
      ++result_.neutral_at_start;
      c.kind = z.slope < 0.0 ? ZeroKind::kStable : ZeroKind::kUnstable;
    }
    c.origin_sign = z.x < 0.0 ? -1 : 1;
    c.jet = field_.jet(t, z.x);
    ZeroCurve curve;
    curve.id = c.id;
    curve.kind = c.kind;
    curve.origin_sign = c.origin_sign;
    curve.times.push_back(t);
    curve.positions.push_back(z.x);
    result_.curves.push_back(std::move(curve));
    alive_.push_back(c);
  }
  for (std::size_t i = 0; i < pair_count(); ++i) {
    if (alive_[i].kind == alive_[next(i)].kind) {
      throw TrackingError("initial scan: neighbouring zeros of the same kind");
    }
  }
}

std::optional<Fold> Tracker::fold(std::size_t i, double t, double horizon) const {
  const double a = alive_[i].x;
  const double b = right_x(i);
  const double scale = std::abs(b - a);
  auto slope_at = [this](double tt) {
    return [this, tt](double x) {
      const FieldJet j = field_.jet(tt, x);
      return std::pair{j.ux, j.uxx};
    };
  };
  double xc = rtsafe(slope_at(t), a, b, alive_[i].jet.ux, 0.0).x;
  FieldJet jc = field_.jet(t, xc);
  if (!(jc.u * jc.uxx < 0.0)) return std::nullopt;
  double tau = t;
  for (int it = 0; it < 40; ++it) {
    const double tau_new = tau - jc.u / jc.uxx;
    if (!(tau_new > t - 1e-12 * t) || tau_new > horizon) return std::nullopt;
    const bool done = std::abs(tau_new - tau) <= 1e-14 * tau_new;
    tau = std::max(tau_new, t);
    for (int k = 0; k < 8; ++k) {
      jc = field_.jet(tau, xc);
      const double dx = jc.ux / jc.uxx;
      xc -= dx;
      if (std::abs(dx) <= 1e-15 * std::max(1.0, std::abs(xc))) break;
    }
    jc = field_.jet(tau, xc);
    if (std::abs(xc - 0.5 * (a + b)) > scale) return std::nullopt;
    if (done || std::abs(jc.u) <= tol_.zero_tol) return Fold{i, tau, xc};
  }
  return std::nullopt;
}

bool Tracker::advance(double t_new, const std::vector<bool>& dying,
                      std::vector<double>& xs, std::vector<FieldJet>& js) {
  const std::size_t n = alive_.size();
  xs.assign(n, 0.0);
  js.assign(n, FieldJet{});
  std::vector<std::size_t> active;
  const double dt = t_new - current_time_;
  for (std::size_t i = 0; i < n; ++i) {
    if (dying[i]) continue;
    xs[i] = alive_[i].x - dt * alive_[i].jet.uxx / alive_[i].jet.ux;
    active.push_back(i);
  }
  std::vector<double> pred = xs;
  std::vector<bool> done(n, false);
  std::vector<std::size_t> work = active;
  for (int it = 0; it < cfg_.newton_iterations && !work.empty(); ++it) {
    std::vector<double> pts;
    pts.reserve(work.size());
    for (std::size_t i : work) pts.push_back(xs[i]);
    const auto jj = field_.jets(t_new, pts);
    std::vector<std::size_t> remaining;
    for (std::size_t k = 0; k < work.size(); ++k) {
      const std::size_t i = work[k];
      js[i] = jj[k];
      if (std::abs(jj[k].u) <= tol_.zero_tol) {
        done[i] = true;
        continue;
      }
      const double dx = jj[k].u / jj[k].ux;
      if (!std::isfinite(dx)) return false;
      xs[i] -= dx;
      if (std::abs(dx) <= 4e-16 * std::max(1.0, std::abs(xs[i]))) {
        const FieldJet last = field_.jet(t_new, xs[i]);
        js[i] = last;
        if (std::abs(last.u) > 10.0 * tol_.zero_tol) return false;
        done[i] = true;
        continue;
      }
      remaining.push_back(i);
    }
    work.swap(remaining);
  }
  if (!work.empty()) return false;

  // Kinds, ordering, size of the correction.
  double prev_x = -std::numeric_limits<double>::infinity();
  for (std::size_t i : active) {
    const bool ok_kind = alive_[i].kind == ZeroKind::kStable ? js[i].ux < 0.0
                                                             : js[i].ux > 0.0;
    if (!ok_kind || !(xs[i] > prev_x)) return false;
    prev_x = xs[i];
  }
  if (result_.periodic && active.size() > 1 &&
      !(xs[active.back()] - xs[active.front()] < period_)) {
    return false;
  }
  for (std::size_t k = 0; k + 1 < active.size(); ++k) {
    const double gap = xs[active[k + 1]] - xs[active[k]];
    if (std::abs(xs[active[k]] - pred[active[k]]) > 0.5 * gap) return false;
    if (std::abs(xs[active[k + 1]] - pred[active[k + 1]]) > 0.5 * gap) return false;
  }
  // Sign of u between neighbouring survivors.
  if (active.size() >= 2) {
    std::vector<double> mids;
    std::vector<int> expect;
    const std::size_t pairs = result_.periodic ? active.size() : active.size() - 1;
    for (std::size_t k = 0; k < pairs; ++k) {
      const std::size_t i = active[k];
      const std::size_t j = active[(k + 1) % active.size()];
      const double xr = (k + 1 == active.size()) ? xs[j] + period_ : xs[j];
      mids.push_back(0.5 * (xs[i] + xr));
      expect.push_back(alive_[i].kind == ZeroKind::kStable ? -1 : 1);
      if (alive_[i].kind == alive_[j].kind) return false;
    }
    const auto mj = field_.jets(t_new, mids);
    for (std::size_t k = 0; k < mids.size(); ++k) {
      if (mj[k].u * expect[k] <= 0.0) return false;
    }
  }
  return true;
}

void Tracker::bury(const Fold& f, double t_prev) {
  const std::size_t ia = f.left;
  const std::size_t ib = next(ia);
  const bool wrapped = ib == 0;
  const double shift = wrapped ? period_ : 0.0;
  Live& a = alive_[ia];
  Live& b = alive_[ib];
  ZeroCurve& ca = result_.curves[static_cast<std::size_t>(a.id)];
  ZeroCurve& cb = result_.curves[static_cast<std::size_t>(b.id)];
  const double span = f.t - t_prev;
  for (int g = 1; g <= cfg_.graded_samples && span > 0.0; ++g) {
    const double s = f.t - span * std::ldexp(1.0, -g);
    const double w = std::sqrt(2.0 * (f.t - s));
    for (int side = 0; side < 2; ++side) {
      double x = side == 0 ? f.x - w : f.x + w;
      bool ok = false;
      for (int it = 0; it < 30; ++it) {
        const FieldJet j = field_.jet(s, x);
        if (std::abs(j.u) <= tol_.zero_tol) {
          ok = true;
          break;
        }
        x -= j.u / j.ux;
        if (!std::isfinite(x)) break;
      }
      if (!ok) continue;
      if ((side == 0) != (x < f.x)) continue;
      const FieldJet j = field_.jet(s, x);
      const Live& who = side == 0 ? a : b;
      if ((who.kind == ZeroKind::kStable) != (j.ux < 0.0)) continue;
      ZeroCurve& c = side == 0 ? ca : cb;
      const double stored = side == 0 ? x : x - shift;
      if (s > c.times.back()) {
        c.times.push_back(s);
        c.positions.push_back(stored);
      }
    }
  }
  ca.times.push_back(f.t);
  ca.positions.push_back(f.x);
  cb.times.push_back(f.t);
  cb.positions.push_back(f.x - shift);
  ca.death_time = f.t;
  cb.death_time = f.t;
  AnnihilationEvent e;
  e.t = f.t;
  e.x = f.x;
  if (a.kind == ZeroKind::kStable) {
    e.stable_id = a.id;
    e.unstable_id = b.id;
  } else {
    e.stable_id = b.id;
    e.unstable_id = a.id;
  }
  result_.events.push_back(e);
}

void Tracker::record(double t) {
  if (!cfg_.record_frontier) return;
  FrontierRecord rec;
  std::vector<AliveZero> view;
  view.reserve(alive_.size());
  for (const Live& c : alive_) view.push_back({c.id, c.x, c.kind, c.origin_sign});
  ++result_.frontier_queries;
  try {
    rec.frontier = frontier(view, t);
    rec.valid = true;
  } catch (const FrontierError&) {
    rec.frontier.t = t;
    const bool has_left = std::any_of(view.begin(), view.end(),
                                      [](const AliveZero& z) { return z.origin_sign < 0; });
    const bool has_right = std::any_of(view.begin(), view.end(),
                                       [](const AliveZero& z) { return z.origin_sign > 0; });
    if (has_left && has_right) {
      rec.alternative_violated = true;
      ++result_.frontier_violations;
    } else {
      ++result_.frontier_invalid;
    }
    result_.frontier_history.push_back(rec);
    return;
  }
  if (cfg_.audit_frontier) {
    const double pts[2] = {rec.frontier.L, rec.frontier.R};
    const auto jj = field_.jets(t, pts);
    const ZeroKind kl = classify(jj[0].ux, tol_.slope_tol);
    const ZeroKind kr = classify(jj[1].ux, tol_.slope_tol);
    if (kl == kr || kl == ZeroKind::kNeutral || kr == ZeroKind::kNeutral) {
      rec.alternative_violated = true;
      ++result_.frontier_violations;
    }
  }
  result_.frontier_history.push_back(rec);
}

void Tracker::checkpoint(double t) {
  ZeroSnapshot snap;
  snap.t = t;
  for (const Live& c : alive_) snap.alive.push_back({c.id, c.x, c.kind, c.origin_sign});
  if (result_.periodic) {
    const int count = static_cast<int>(
        find_zeros(field_, t, interval_, scan_points(t, interval_, cfg_.scan_density), tol_)
            .size());
    snap.rescan_count = count;
    if (count != static_cast<int>(alive_.size())) ++result_.lap_violations;
    if (last_count_ && count > *last_count_) ++result_.lap_violations;
    last_count_ = count;
  }
  result_.snapshots.push_back(std::move(snap));
}

TrackResult Tracker::run() {
  if (!(cfg_.t_max > cfg_.t_min) || !(cfg_.t_min > 0.0)) {
    throw ConfigError("track_zero_curves: need 0 < t_min < t_max");
  }
  if (cfg_.t_min < field_.time_floor()) {
    throw PrecisionError("track_zero_curves: t_min below the field floor");
  }
  std::vector<double> checkpoints;
  for (double c : cfg_.checkpoints) {
    if (c >= cfg_.t_min && c <= cfg_.t_max) checkpoints.push_back(c);
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  std::size_t next_check = 0;

  start();
  double t = cfg_.t_min;
  current_time_ = t;
  while (next_check < checkpoints.size() && checkpoints[next_check] <= t) {
    checkpoint(t);
    ++next_check;
  }
  record(t);

  double h = cfg_.step_fraction * t;
  std::vector<double> xs;
  std::vector<FieldJet> js;
  while (t < cfg_.t_max) {
    if (t >= 2.0 * tol_time_) refresh_tolerances(t);
    double target = std::min(t + h, cfg_.t_max);
    if (next_check < checkpoints.size()) target = std::min(target, checkpoints[next_check]);
    if (target - cfg_.t_max > -1e-14 * cfg_.t_max) target = cfg_.t_max;

    // Pairs that may fold before the target.
    std::vector<Fold> folds;
    for (std::size_t i = 0; i < pair_count(); ++i) {
      const Live& a = alive_[i];
      const Live& b = alive_[next(i)];
      if (a.kind == b.kind) continue;
      const double gap = right_x(i) - a.x;
      const double va = -a.jet.uxx / a.jet.ux;
      const double vb = -b.jet.uxx / b.jet.ux;
      double tau = gap * gap / 8.0;
      if (va - vb > 0.0) tau = std::min(tau, gap / (2.0 * (va - vb)));
      if (tau < 2.0 * (target - t)) {
        if (auto f = fold(i, t, target)) folds.push_back(*f);
      }
    }
    std::vector<bool> dying(alive_.size(), false);
    std::vector<Fold> now;
    if (!folds.empty()) {
      double first = folds.front().t;
      for (const Fold& f : folds) first = std::min(first, f.t);
      target = std::max(first, t);
      for (const Fold& f : folds) {
        if (f.t <= target * (1.0 + 1e-13) && !dying[f.left] && !dying[next(f.left)]) {
          dying[f.left] = true;
          dying[next(f.left)] = true;
          now.push_back(f);
        }
      }
    }
    if (target > t) {
      if (!advance(target, dying, xs, js)) {
        ++result_.retried_steps;
        h = 0.5 * (target - t);
        if (h < 1e-12 * t) {
          std::ostringstream msg;
          msg << "tracking stalled at t = " << t << " with " << alive_.size()
              << " zeros";
          throw TrackingError(msg.str());
        }
        continue;
      }
    }
    for (const Fold& f : now) bury(f, t);
    std::vector<Live> survivors;
    survivors.reserve(alive_.size());
    for (std::size_t i = 0; i < alive_.size(); ++i) {
      if (dying[i]) continue;
      Live c = alive_[i];
      if (target > t) {
        c.x = xs[i];
        c.jet = js[i];
        ZeroCurve& curve = result_.curves[static_cast<std::size_t>(c.id)];
        curve.times.push_back(target);
        curve.positions.push_back(c.x);
        result_.max_residual_ratio =
            std::max(result_.max_residual_ratio, std::abs(c.jet.u) / tol_.zero_tol);
      }
      if (!result_.periodic && (c.x < interval_.lo || c.x > interval_.hi)) {
        result_.curves[static_cast<std::size_t>(c.id)].exited = true;
        continue;
      }
      survivors.push_back(c);
    }
    alive_.swap(survivors);
    if (target > t) result_.step_sizes.push_back(target - t);
    else result_.step_sizes.push_back(0.0);
    const double step = target - t;
    t = target;
    current_time_ = t;
    while (next_check < checkpoints.size() &&
           checkpoints[next_check] <= t * (1.0 + 1e-14)) {
      checkpoint(t);
      ++next_check;
    }
    record(t);
    h = std::min(std::max(h, step) * 1.25, cfg_.step_fraction * t);
    if (h <= 0.0) h = cfg_.step_fraction * t;
  }
  return std::move(result_);
}

}  // namespace

TrackResult track_zero_curves(const VelocityField& field, Interval interval,
                              const TrackConfig& cfg) {
  Tracker tracker(field, interval, cfg);
  return tracker.run();
}

FrontierPaths frontier_paths(const TrackResult& track, double start, double end) {
  FrontierPaths out;
  const auto& hist = track.frontier_history;
  const FrontierRecord* prev = nullptr;
  auto add_between = [&track](CadlagPath& path, std::int64_t id, double lo, double hi) {
    const ZeroCurve& c = track.curves[static_cast<std::size_t>(id)];
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      if (c.times[k] > lo && c.times[k] < hi) path.push(c.times[k], c.positions[k]);
    }
  };
  auto extend = [&](CadlagPath& path, std::int64_t old_id, std::int64_t new_id,
                    double value, double t_prev, double t, ZJump* jump) {
    add_between(path, old_id, t_prev, t);
    if (old_id == new_id) {
      path.push(t, value);
      return;
    }
    const double left = track.curves[static_cast<std::size_t>(old_id)].position_at(
        std::min(t, track.curves[static_cast<std::size_t>(old_id)].times.back()));
    path.push_jump(t, left, value);
    if (jump) *jump = {t, left, value, old_id, new_id, t_prev};
  };
  for (const FrontierRecord& rec : hist) {
    if (!rec.valid) continue;
    const double t = rec.frontier.t;
    if (t < start || t > end) continue;
    const Frontier& f = rec.frontier;
    if (!prev) {
      out.L.push(t, f.L);
      out.R.push(t, f.R);
      out.Z.push(t, f.Z);
      prev = &rec;
      continue;
    }
    if (!(t > prev->frontier.t)) continue;
    const Frontier& p = prev->frontier;
    extend(out.L, p.L_id, f.L_id, f.L, p.t, t, nullptr);
    extend(out.R, p.R_id, f.R_id, f.R, p.t, t, nullptr);
    ZJump jump;
    extend(out.Z, p.Z_id, f.Z_id, f.Z, p.t, t, &jump);
    if (p.Z_id != f.Z_id) out.z_jumps.push_back(jump);
    prev = &rec;
  }
  return out;
}

}  // namespace heattracer
