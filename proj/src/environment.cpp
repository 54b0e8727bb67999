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

#include "heattracer/environment.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "heattracer/errors.hpp"

namespace heattracer {

namespace {

constexpr double kPi = std::numbers::pi;
// Modes with k^2 t above this contribute less than e^-40 of their amplitude.
constexpr double kDecayCutoff = 40.0;

std::mt19937_64 make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

double heat_kernel(double t, double x, int d_order) {
  if (!(t > 0.0)) {
    throw std::domain_error("heat_kernel: t must be positive, got " +
                            std::to_string(t));
  }
  if (d_order < 0 || d_order > 4) {
    throw std::domain_error("heat_kernel: derivative order must be in 0..4");
  }
  // P_t is the N(0, 2t) density; d^n/dx^n = (-1)^n He_n(z) φ(z) / σ^{n+1}.
  const double sigma = std::sqrt(2.0 * t);
  const double z = x / sigma;
  const double density = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * kPi));
  double he_prev = 1.0;
  double he = z;
  if (d_order == 0) return density;
  for (int n = 1; n < d_order; ++n) {
    const double next = z * he - n * he_prev;
    he_prev = he;
    he = next;
  }
  const double sign = (d_order % 2 == 0) ? 1.0 : -1.0;
  return sign * he * density / std::pow(sigma, d_order);
}

namespace {

int kernel_order(PairOrder order) {
  switch (order) {
    case PairOrder::kUU:
      return 0;
    case PairOrder::kDxuDxu:
      return 2;
    case PairOrder::kDtuDtu:
      return 4;
  }
  return 0;
}

double kernel_sign(PairOrder order) {
  return order == PairOrder::kDxuDxu ? -1.0 : 1.0;
}

}  // namespace

double covariance(const CovarianceRequest& request,
                  std::optional<Periodization> periodization) {
  const double ts = request.a.t + request.b.t;
  if (!(ts > 0.0)) {
    throw std::domain_error("covariance: t + s must be positive");
  }
  const int order = kernel_order(request.pair_order);
  const double sign = kernel_sign(request.pair_order);
  const double dx = request.a.x - request.b.x;
  if (!periodization) return sign * heat_kernel(ts, dx, order);

  const double period = periodization->period;
  if (!(period > 0.0)) {
    throw std::domain_error("covariance: period must be positive");
  }
  const double base = dx - period * std::round(dx / period);
  double total = heat_kernel(ts, base, order);
  const double scale = std::abs(heat_kernel(ts, 0.0, order)) +
                       std::abs(heat_kernel(ts, std::sqrt(2.0 * ts), order));
  for (int n = 1;; ++n) {
    const double right = heat_kernel(ts, base + n * period, order);
    const double left = heat_kernel(ts, base - n * period, order);
    total += right + left;
    if (std::abs(right) + std::abs(left) < 1e-16 * scale && n > 1) break;
    if (n > 100000) break;
  }
  // Only the plain kernel has a non-zero spatial integral.
  if (periodization->zero_mean && order == 0) total -= 1.0 / period;
  return sign * total;
}

void EnvironmentSpec::validate() const {
  if (!(domain_length > 0.0)) {
    throw ConfigError("environment: domain_length must be positive");
  }
  if (mode_count < 4 || mode_count % 2 != 0) {
    throw ConfigError("environment: mode_count must be an even integer >= 4");
  }
}

Environment::Environment(const EnvironmentSpec& spec) : spec_(spec) {
  spec_.validate();
  const double length = spec_.domain_length;
  k1_ = 2.0 * kPi / length;
  const int half = spec_.mode_count / 2;
  cos_amp_.resize(half);
  sin_amp_.resize(half);

  auto engine = make_engine(spec_.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Zero mode is always drawn so the other amplitudes do not depend on
  // whether it is kept.
  const double a0 = normal(engine);
  zero_mode_ =
      spec_.zero_mode == ZeroMode::kIncluded ? a0 / std::sqrt(length) : 0.0;
  const double amp = std::sqrt(2.0 / length);
  for (int m = 0; m < half; ++m) {
    cos_amp_[m] = amp * normal(engine);
    sin_amp_[m] = amp * normal(engine);
  }
}

void Environment::check_time(double t) const {
  if (!(t >= spec_.time_floor())) {
    throw PrecisionError("environment: t = " + std::to_string(t) +
                         " is below the resolved floor " +
                         std::to_string(spec_.time_floor()));
  }
}

int Environment::active_modes(double t) const {
  const int half = spec_.mode_count / 2;
  if (!(t > 0.0)) return half;
  const double m_max = std::sqrt(kDecayCutoff / t) / k1_;
  if (m_max >= half) return half;
  return static_cast<int>(m_max) + 1 > half ? half : static_cast<int>(m_max) + 1;
}

void Environment::decay_factors(double t, int count, double* out) const {
  // exp(-k1² m² t) by the recurrence r_m = r_{m-1} q^{2m-1}.
  const double q = std::exp(-k1_ * k1_ * t);
  const double q2 = q * q;
  double step = q;
  double r = 1.0;
  for (int m = 0; m < count; ++m) {
    r *= step;
    step *= q2;
    out[m] = r;
  }
}

namespace {

double reduce_phase(double x, double length) {
  double xr = std::fmod(x, length);
  if (xr < 0.0) xr += length;
  return xr;
}

}  // namespace

FieldJet Environment::jet(double t, double x) const {
  check_time(t);
  const int count = active_modes(t);
  const double xr = reduce_phase(x, spec_.domain_length);
  const double c1 = std::cos(k1_ * xr);
  const double s1 = std::sin(k1_ * xr);
  const double q = std::exp(-k1_ * k1_ * t);
  const double q2 = q * q;
  double step = q;
  double r = 1.0;
  double c = 1.0;
  double s = 0.0;
  double u = 0.0;
  double ux = 0.0;
  double uxx = 0.0;
  for (int m = 0; m < count; ++m) {
    const double cn = c * c1 - s * s1;
    s = s * c1 + c * s1;
    c = cn;
    r *= step;
    step *= q2;
    const double k = k1_ * (m + 1);
    const double even = cos_amp_[m] * c + sin_amp_[m] * s;
    const double odd = sin_amp_[m] * c - cos_amp_[m] * s;
    u += r * even;
    ux += r * k * odd;
    uxx -= r * k * k * even;
  }
  return {u + zero_mode_, ux, uxx};
}

double Environment::value_unchecked(double t, double x) const {
  const int count = active_modes(t);
  const double xr = reduce_phase(x, spec_.domain_length);
  const double c1 = std::cos(k1_ * xr);
  const double s1 = std::sin(k1_ * xr);
  const double q = std::exp(-k1_ * k1_ * t);
  const double q2 = q * q;
  double step = q;
  double r = 1.0;
  double c = 1.0;
  double s = 0.0;
  double u = 0.0;
  for (int m = 0; m < count; ++m) {
    const double cn = c * c1 - s * s1;
    s = s * c1 + c * s1;
    c = cn;
    r *= step;
    step *= q2;
    u += r * (cos_amp_[m] * c + sin_amp_[m] * s);
  }
  return u + zero_mode_;
}

double Environment::value(double t, double x) const {
  check_time(t);
  return value_unchecked(t, x);
}

double Environment::eval_u(double t, double x, int d_order) const {
  const FieldJet j = jet(t, x);
  switch (d_order) {
    case 0:
      return j.u;
    case 1:
      return j.ux;
    case 2:
      return j.uxx;
    default:
      throw std::domain_error("eval_u: derivative order must be 0, 1 or 2");
  }
}

std::vector<FieldJet> Environment::jets(double t,
                                        std::span<const double> xs) const {
  check_time(t);
  const int count = active_modes(t);
  std::vector<double> decay(count);
  decay_factors(t, count, decay.data());
  std::vector<FieldJet> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double xr = reduce_phase(xs[i], spec_.domain_length);
    const double c1 = std::cos(k1_ * xr);
    const double s1 = std::sin(k1_ * xr);
    double c = 1.0;
    double s = 0.0;
    double u = 0.0;
    double ux = 0.0;
    double uxx = 0.0;
    for (int m = 0; m < count; ++m) {
      const double cn = c * c1 - s * s1;
      s = s * c1 + c * s1;
      c = cn;
      const double k = k1_ * (m + 1);
      const double r = decay[m];
      const double even = cos_amp_[m] * c + sin_amp_[m] * s;
      const double odd = sin_amp_[m] * c - cos_amp_[m] * s;
      u += r * even;
      ux += r * k * odd;
      uxx -= r * k * k * even;
    }
    out[i] = {u + zero_mode_, ux, uxx};
  }
  return out;
}

std::vector<double> Environment::values(double t,
                                        std::span<const double> xs) const {
  check_time(t);
  const int count = active_modes(t);
  std::vector<double> decay(count);
  decay_factors(t, count, decay.data());
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double xr = reduce_phase(xs[i], spec_.domain_length);
    const double c1 = std::cos(k1_ * xr);
    const double s1 = std::sin(k1_ * xr);
    double c = 1.0;
    double s = 0.0;
    double u = 0.0;
    for (int m = 0; m < count; ++m) {
      const double cn = c * c1 - s * s1;
      s = s * c1 + c * s1;
      c = cn;
      u += decay[m] * (cos_amp_[m] * c + sin_amp_[m] * s);
    }
    out[i] = u + zero_mode_;
  }
  return out;
}

double Environment::time_integral(double x, double theta) const {
  if (theta < 0.0) throw std::domain_error("time_integral: theta < 0");
  const double xr = reduce_phase(x, spec_.domain_length);
  const double c1 = std::cos(k1_ * xr);
  const double s1 = std::sin(k1_ * xr);
  double c = 1.0;
  double s = 0.0;
  double total = zero_mode_ * theta;
  const int half = spec_.mode_count / 2;
  for (int m = 0; m < half; ++m) {
    const double cn = c * c1 - s * s1;
    s = s * c1 + c * s1;
    c = cn;
    const double k2 = k1_ * k1_ * (m + 1) * (m + 1);
    // (1 - e^{-k² θ}) / k²
    const double weight = -std::expm1(-k2 * theta) / k2;
    total += weight * (cos_amp_[m] * c + sin_amp_[m] * s);
  }
  return total;
}

Environment sample_environment(const EnvironmentSpec& spec) {
  spec.validate();
  if (spec.backend != Backend::kSpectral) {
    throw ConfigError(
        "sample_environment: the exact oracle backend only samples finite "
        "point sets");
  }
  return Environment(spec);
}

GaussSample exact_gauss_sample(std::span<const SpaceTimePoint> points,
                               std::uint64_t seed) {
  if (points.size() > 2000) {
    throw ConfigError("exact_gauss_sample: at most 2000 points");
  }
  for (const auto& p : points) {
    if (!(p.t > 0.0)) {
      throw std::domain_error("exact_gauss_sample: all t must be positive");
    }
  }
  // Coincident points are merged so their draws agree exactly.
  std::vector<SpaceTimePoint> unique;
  std::vector<std::size_t> slot(points.size());
  std::map<std::pair<double, double>, std::size_t> index;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto key = std::make_pair(points[i].t, points[i].x);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, unique.size()).first;
      unique.push_back(points[i]);
    }
    slot[i] = it->second;
  }
  const auto n = static_cast<Eigen::Index>(unique.size());
  Eigen::MatrixXd sigma(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double c = heat_kernel(unique[i].t + unique[j].t,
                                   unique[i].x - unique[j].x, 0);
      sigma(i, j) = c;
      sigma(j, i) = c;
    }
  }
  GaussSample result;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    sigma.diagonal().array() += 1e-12;
    llt.compute(sigma);
    result.regularized = true;
    std::clog << "warning: exact_gauss_sample: covariance not numerically "
                 "positive definite, added 1e-12 to the diagonal\n";
    if (llt.info() != Eigen::Success) {
      throw NumericalError("exact_gauss_sample: factorization failed");
    }
  }
  auto engine = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(engine);
  const Eigen::VectorXd draw = llt.matrixL() * z;
  result.values.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    result.values[i] = draw(static_cast<Eigen::Index>(slot[i]));
  }
  return result;
}

std::vector<double> sample_points(const EnvironmentSpec& spec,
                                  std::span<const SpaceTimePoint> points) {
  spec.validate();
  if (spec.backend == Backend::kExactOracle) {
    return exact_gauss_sample(points, spec.seed).values;
  }
  const Environment env(spec);
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(env.value(p.t, p.x));
  return out;
}

ScaledField::ScaledField(const VelocityField& base, double alpha)
    : base_(&base), alpha_(alpha) {
  if (!(alpha > 0.0)) {
    throw std::domain_error("scaling_view: alpha must be positive");
  }
  amp_ = std::pow(alpha, 0.25);
  space_ = std::sqrt(alpha);
}

FieldJet ScaledField::jet(double t, double x) const {
  const FieldJet j = base_->jet(alpha_ * t, space_ * x);
  return {amp_ * j.u, amp_ * space_ * j.ux, amp_ * alpha_ * j.uxx};
}

double ScaledField::value(double t, double x) const {
  return amp_ * base_->value(alpha_ * t, space_ * x);
}

double ScaledField::time_floor() const { return base_->time_floor() / alpha_; }

std::optional<double> ScaledField::period() const {
  const auto p = base_->period();
  if (!p) return std::nullopt;
  return *p / space_;
}

double ScaledField::value_unchecked(double t, double x) const {
  return amp_ * base_->value_unchecked(alpha_ * t, space_ * x);
}

ScaledField scaling_view(const VelocityField& field, double alpha) {
  return ScaledField(field, alpha);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer over a golden-ratio stride.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace heattracer
