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

#include "heattracer/tracer.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <stdexcept>

#include "heattracer/errors.hpp"

namespace heattracer {

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0 && rel_tol <= 1e-2) || !(abs_tol > 0.0 && abs_tol <= 1e-2)) {
    throw ConfigError("integrator: tolerances must lie in (0, 1e-2]");
  }
  if (!(max_step > 0.0) || !(t_init_factor > 0.0) || !(min_init_time > 0.0)) {
    throw ConfigError("integrator: max_step, t_init_factor and min_init_time "
                      "must be positive");
  }
}

void TracerPath::append(double t, double x, double velocity) {
  times_.push_back(t);
  positions_.push_back(x);
  velocities_.push_back(velocity);
}

std::size_t TracerPath::segment(double t) const {
  if (times_.size() < 2) return 0;
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t i = static_cast<std::size_t>(it - times_.begin());
  if (i == 0) return 0;
  i -= 1;
  return std::min(i, times_.size() - 2);
}

double TracerPath::at(double t) const {
  if (times_.empty()) throw std::logic_error("TracerPath::at on empty path");
  if (times_.size() == 1) return positions_.front();
  const std::size_t i = segment(t);
  const double h = times_[i + 1] - times_[i];
  const double s = (t - times_[i]) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * positions_[i] +
         (s3 - 2 * s2 + s) * h * velocities_[i] +
         (-2 * s3 + 3 * s2) * positions_[i + 1] +
         (s3 - s2) * h * velocities_[i + 1];
}

double TracerPath::derivative_at(double t) const {
  if (times_.empty()) throw std::logic_error("TracerPath on empty path");
  if (times_.size() == 1) return velocities_.front();
  const std::size_t i = segment(t);
  const double h = times_[i + 1] - times_[i];
  const double s = (t - times_[i]) / h;
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * positions_[i] + (-6 * s2 + 6 * s) * positions_[i + 1]) / h +
         (3 * s2 - 4 * s + 1) * velocities_[i] + (3 * s2 - 2 * s) * velocities_[i + 1];
}

std::vector<double> TracerPath::sample(std::span<const double> grid) const {
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back(at(t));
  return out;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

// PI controller constants.
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kSafety = 0.9;
constexpr double kMaxGrow = 5.0;
constexpr double kMaxShrink = 10.0;

// Where the derivative error of the cubic Hermite interpolant peaks.
const double kResidualProbe = (3.0 - std::sqrt(3.0)) / 6.0;

double initial_step(const ScalarRhs& rhs, double t0, double x0, double f0,
                    double span, const IntegratorConfig& cfg) {
  const double sk = cfg.abs_tol + cfg.rel_tol * std::abs(x0);
  const double dnf = (f0 / sk) * (f0 / sk);
  const double dny = (x0 / sk) * (x0 / sk);
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
  h = std::min({h, cfg.max_step, span});
  if (t0 > 0.0) h = std::min(h, 0.01 * t0 + 1e-300);
  const double f1 = rhs(t0 + h, x0 + h * f0);
  const double der2 = std::abs(f1 - f0) / sk / h;
  const double der12 = std::max(der2, std::sqrt(dnf));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3)
                                   : std::pow(0.01 / der12, 0.2);
  return std::min({100 * h, h1, cfg.max_step, span});
}

}  // namespace

TracerResult integrate_ode(const ScalarRhs& rhs, double x_start,
                           double t_start, double t_end,
                           const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(t_end > t_start)) {
    throw std::domain_error("integrate_ode: t_end must exceed t_start");
  }
  TracerResult result;
  double t = t_start;
  double x = x_start;
  double f = 0.0;
  try {
    f = rhs(t, x);
  } catch (const std::exception& e) {
    result.error = std::string("field evaluation failed: ") + e.what();
    return result;
  }
  result.path.append(t, x, f);

  double h = 0.0;
  try {
    h = initial_step(rhs, t, x, f, t_end - t, cfg);
  } catch (const std::exception& e) {
    result.error = std::string("field evaluation failed: ") + e.what();
    return result;
  }
  double err_old = 1e-4;
  bool last_rejected = false;

  try {
    while (t < t_end) {
      if (result.accepted_steps + result.rejected_steps > cfg.max_steps) {
        result.error = "maximum number of steps exceeded";
        return result;
      }
      if (h < 1e-14 * std::max(std::abs(t), 1e-300)) {
        result.error = "step size underflow at t = " + std::to_string(t);
        return result;
      }
      bool final_step = false;
      if (t + h >= t_end || t + 1.01 * h >= t_end) {
        h = t_end - t;
        final_step = true;
      }
      const double k1 = f;
      const double k2 = rhs(t + c2 * h, x + h * a21 * k1);
      const double k3 = rhs(t + c3 * h, x + h * (a31 * k1 + a32 * k2));
      const double k4 = rhs(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
      const double k5 = rhs(t + c5 * h,
                            x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const double k6 = rhs(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 +
                                             a64 * k4 + a65 * k5));
      const double x_new =
          x + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      const double t_new = final_step ? t_end : t + h;
      const double k7 = rhs(t_new, x_new);

      const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(x), std::abs(x_new));
      double err = std::abs(h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 +
                                 e6 * k6 + e7 * k7)) / scale;
      if (cfg.control_dense_residual) {
        const double s = kResidualProbe;
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double xp = (2 * s3 - 3 * s2 + 1) * x + (s3 - 2 * s2 + s) * h * k1 +
                          (-2 * s3 + 3 * s2) * x_new + (s3 - s2) * h * k7;
        const double dxp = ((6 * s2 - 6 * s) * x + (-6 * s2 + 6 * s) * x_new) / h +
                           (3 * s2 - 4 * s + 1) * k1 + (3 * s2 - 2 * s) * k7;
        const double fp = rhs(t + s * h, xp);
        const double residual =
            std::abs(dxp - fp) / (2.0 * cfg.rel_tol * (1.0 + std::abs(fp)));
        // The residual scales as h^3; map it to the h^5 scale of err.
        err = std::max(err, std::pow(residual, 5.0 / 3.0));
      }

      const double fac11 = std::pow(std::max(err, 1e-300), kExpo);
      if (err <= 1.0) {
        double fac = fac11 / std::pow(err_old, kBeta);
        fac = std::clamp(fac / kSafety, 1.0 / kMaxShrink, kMaxGrow);
        double h_new = std::min(h / fac, cfg.max_step);
        if (last_rejected) h_new = std::min(h_new, h);
        err_old = std::max(err, 1e-4);
        t = t_new;
        x = x_new;
        f = k7;
        result.path.append(t, x, f);
        ++result.accepted_steps;
        last_rejected = false;
        h = h_new;
        if (final_step) break;
      } else {
        h /= std::min(kMaxGrow, fac11 / kSafety);
        ++result.rejected_steps;
        last_rejected = true;
      }
    }
  } catch (const std::exception& e) {
    result.error = std::string("field evaluation failed: ") + e.what();
  }
  return result;
}

TracerResult integrate_tracer(const VelocityField& field, double x_start,
                              double t_start, double t_end,
                              const IntegratorConfig& cfg) {
  if (t_start < field.time_floor()) {
    throw PrecisionError("integrate_tracer: t_start below the field floor");
  }
  auto rhs = [&field](double t, double x) { return field.value(t, x); };
  TracerResult result = integrate_ode(rhs, x_start, t_start, t_end, cfg);
  result.path.set_t_init(t_start);
  return result;
}

namespace {

using Gauss = boost::math::quadrature::gauss<double, 10>;

// ∫_lo^hi g(s) ds with s = τ⁴.
template <class F>
double graded_panel(const F& g, double lo, double hi) {
  const double tau_lo = std::sqrt(std::sqrt(lo));
  const double tau_hi = std::sqrt(std::sqrt(hi));
  return Gauss::integrate(
      [&g](double tau) {
        const double tau2 = tau * tau;
        return 4.0 * tau2 * tau * g(tau2 * tau2);
      },
      tau_lo, tau_hi);
}

// ∫_lo^hi g(s) ds with panels halving toward lo (or toward 0 when lo = 0).
template <class F>
double graded_integral(const F& g, double lo, double hi, double bottom) {
  if (hi <= lo) return 0.0;
  double total = 0.0;
  double upper = hi;
  while (true) {
    const double lower = 0.5 * upper;
    if (lower <= lo || (lo == 0.0 && upper <= bottom)) {
      total += graded_panel(g, lo, upper);
      break;
    }
    total += graded_panel(g, lower, upper);
    upper = lower;
  }
  return total;
}

}  // namespace

ShortTimeFunctional short_time_functional(const VelocityField& field,
                                          std::span<const double> theta_grid,
                                          std::optional<double> scale,
                                          double x) {
  if (scale && !(*scale > 0.0)) {
    throw std::domain_error("short_time_functional: scale must be positive");
  }
  const double factor = scale ? *scale : 1.0;
  double previous = 0.0;
  for (double theta : theta_grid) {
    if (theta < previous) {
      throw std::domain_error("short_time_functional: theta grid must be increasing");
    }
    previous = theta;
  }
  const double floor = field.time_floor();
  if (const auto period = field.period(); period && !theta_grid.empty()) {
    if (theta_grid.back() * factor > (*period) * (*period) / 100.0) {
      throw ConfigError("short_time_functional: θT exceeds Λ²/100");
    }
  }

  ShortTimeFunctional out;
  out.scale = scale;
  out.theta_grid.assign(theta_grid.begin(), theta_grid.end());
  out.values.reserve(theta_grid.size());

  auto integrand = [&field, floor, x](double s) {
    return s < floor ? field.value_unchecked(s, x) : field.value(s, x);
  };
  double running = 0.0;
  double lo = 0.0;
  for (double theta : theta_grid) {
    const double hi = theta * factor;
    if (hi > lo) {
      // Below the floor the truncated field is smooth on the scale floor/π²;
      // panels reach well under that.
      const double bottom = floor > 0.0 ? std::min(floor, hi) / 64.0
                                        : hi * std::ldexp(1.0, -24);
      running += graded_integral(integrand, lo, hi, bottom);
      if (lo < floor) out.extrapolated_below_floor = true;
      lo = hi;
    }
    out.values.push_back(scale ? running / std::pow(factor, 0.75) : running);
  }
  return out;
}

TracerStart init_tracer(const VelocityField& field,
                        const IntegratorConfig& cfg) {
  cfg.validate();
  TracerStart start;
  const double floor = field.time_floor();
  start.t_init = floor > 0.0 ? cfg.t_init_factor * floor : cfg.min_init_time;
  const double grid[] = {start.t_init};
  const ShortTimeFunctional f = short_time_functional(field, grid);
  start.x_init = f.values.front();
  start.extrapolated = f.extrapolated_below_floor;
  return start;
}

TracerResult run_tracer(const VelocityField& field, double t_end,
                        const IntegratorConfig& cfg) {
  const TracerStart start = init_tracer(field, cfg);
  if (!(t_end > start.t_init)) {
    throw ConfigError("run_tracer: t_end must exceed the handoff time");
  }
  return integrate_tracer(field, start.x_init, start.t_init, t_end, cfg);
}

}  // namespace heattracer
