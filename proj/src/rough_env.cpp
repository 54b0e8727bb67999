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

#include "heattracer/rough_env.hpp"

#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>
#include <stdexcept>

#include "heattracer/errors.hpp"

namespace heattracer {

namespace {
constexpr double kPi = std::numbers::pi;
}  // namespace

void RoughSpec::validate() const {
  if (sites < 4 || sites % 2 != 0) throw ConfigError("rough: sites must be even and >= 4");
  if (!(spacing > 0.0)) throw ConfigError("rough: spacing must be positive");
  if (max_wavenumber && !(*max_wavenumber > 0.0)) {
    throw ConfigError("rough: max_wavenumber must be positive");
  }
}

struct RoughModes::Engine {
  explicit Engine(std::seed_seq& seq) : rng(seq) {}
  std::mt19937_64 rng;
  boost::random::normal_distribution<double> normal;
};

RoughModes::RoughModes(const RoughSpec& spec) {
  spec.validate();
  length_ = spec.length();
  sites_ = spec.sites;
  k1_ = 2.0 * kPi / length_;
  int count = spec.sites / 2;
  if (spec.max_wavenumber) {
    count = std::min(count, static_cast<int>(std::floor(*spec.max_wavenumber / k1_)));
  }
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(spec.seed >> 32)};
  engine_ = std::make_shared<Engine>(seq);
  zero_amp_ = engine_->normal(engine_->rng);
  cos_amp_.resize(count);
  sin_amp_.resize(count);
  for (int m = 0; m < count; ++m) {
    cos_amp_[m] = engine_->normal(engine_->rng);
    sin_amp_[m] = engine_->normal(engine_->rng);
  }
}

void RoughModes::advance(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("RoughModes::advance: dt must be positive");
  const int count = mode_count();
  if (dt != cached_dt_) {
    decay_.resize(count);
    noise_.resize(count);
    for (int m = 0; m < count; ++m) {
      const double k = wave_number(m);
      decay_[m] = std::exp(-k * k * dt);
      noise_[m] = std::sqrt(-std::expm1(-2.0 * k * k * dt));
    }
    cached_dt_ = dt;
  }
  for (int m = 0; m < count; ++m) {
    cos_amp_[m] = decay_[m] * cos_amp_[m] + noise_[m] * engine_->normal(engine_->rng);
    sin_amp_[m] = decay_[m] * sin_amp_[m] + noise_[m] * engine_->normal(engine_->rng);
  }
  time_ += dt;
}

namespace {

double mode_sum(double zero_amp, const std::vector<double>& a,
                const std::vector<double>& b, const double* multiplier,
                double k1, double length, double x) {
  const double c1 = std::cos(k1 * x);
  const double s1 = std::sin(k1 * x);
  double c = 1.0;
  double s = 0.0;
  double sum = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    const double cn = c * c1 - s * s1;
    s = s * c1 + c * s1;
    c = cn;
    const double w = multiplier ? multiplier[m] : 1.0;
    sum += w * (a[m] * c + b[m] * s);
  }
  return zero_amp / std::sqrt(length) + std::sqrt(2.0 / length) * sum;
}

std::vector<double> lattice_values(double zero_amp, const std::vector<double>& a,
                                   const std::vector<double>& b, double k1,
                                   double length, int sites) {
  std::vector<double> out(sites);
  const double dx = length / sites;
  for (int j = 0; j < sites; ++j) {
    out[j] = mode_sum(zero_amp, a, b, nullptr, k1, length, j * dx);
  }
  return out;
}

}  // namespace

std::vector<double> RoughModes::site_values() const {
  return lattice_values(zero_amp_, cos_amp_, sin_amp_, k1_, length_, sites_);
}

double RoughTrajectory::wave_number(int m) const {
  return 2.0 * kPi * (m + 1) / spec.length();
}

std::vector<double> RoughTrajectory::site_values(std::size_t snapshot) const {
  return lattice_values(zero_amp, cos_amp[snapshot], sin_amp[snapshot],
                        2.0 * kPi / spec.length(), spec.length(), spec.sites);
}

RoughTrajectory simulate_rough(const RoughSpec& spec, double t_max, double interval) {
  spec.validate();
  if (!(t_max >= 0.0) || !(interval > 0.0)) {
    throw ConfigError("simulate_rough: need t_max >= 0 and interval > 0");
  }
  if (spec.spacing > 0.25) throw ConfigError("simulate_rough: spacing must be <= 1/4");
  if (spec.length() < 20.0 * std::sqrt(t_max)) {
    throw ConfigError("simulate_rough: N * spacing must be >= 20 sqrt(t_max)");
  }
  RoughModes modes(spec);
  RoughTrajectory traj;
  traj.spec = spec;
  traj.interval = interval;
  traj.zero_amp = modes.zero_amp();
  const auto n = static_cast<std::size_t>(std::floor(t_max / interval + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    if (i > 0) modes.advance(interval);
    traj.times.push_back(static_cast<double>(i) * interval);
    traj.cos_amp.push_back(modes.cos_amp());
    traj.sin_amp.push_back(modes.sin_amp());
  }
  return traj;
}

RegularizedField::RegularizedField(const RoughTrajectory& traj, double ell)
    : traj_(&traj), ell_(ell) {
  if (!(ell >= 4.0 * traj.spec.spacing)) {
    throw ConfigError("regularize: ell must be at least 4 lattice spacings");
  }
  const std::size_t count = traj.cos_amp.empty() ? 0 : traj.cos_amp.front().size();
  multiplier_.resize(count);
  for (std::size_t m = 0; m < count; ++m) {
    const double k = traj.wave_number(static_cast<int>(m));
    multiplier_[m] = std::exp(-k * k * ell * ell);
  }
}

RegularizedField::RegularizedField(const RoughTrajectory& traj, double ell,
                                   std::vector<double> multiplier)
    : traj_(&traj), ell_(ell), multiplier_(std::move(multiplier)) {}

RegularizedField RegularizedField::regularize(double ell2) const {
  if (!(ell2 > 0.0)) throw ConfigError("regularize: ell must be positive");
  std::vector<double> mult(multiplier_.size());
  for (std::size_t m = 0; m < mult.size(); ++m) {
    const double k = traj_->wave_number(static_cast<int>(m));
    mult[m] = multiplier_[m] * std::exp(-k * k * ell2 * ell2);
  }
  return RegularizedField(*traj_, std::hypot(ell_, ell2), std::move(mult));
}

double RegularizedField::value(std::size_t snapshot, double x) const {
  const double length = traj_->spec.length();
  double xr = std::fmod(x, length);
  if (xr < 0.0) xr += length;
  return mode_sum(traj_->zero_amp, traj_->cos_amp.at(snapshot),
                  traj_->sin_amp.at(snapshot), multiplier_.data(),
                  2.0 * kPi / length, length, xr);
}

std::vector<double> RegularizedField::values(std::size_t snapshot,
                                             std::span<const double> xs) const {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(value(snapshot, x));
  return out;
}

RegularizedField regularize(const RoughTrajectory& traj, double ell) {
  return RegularizedField(traj, ell);
}

void SLambdaConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("s_lambda: lambda must lie in [0, 1]");
  if (!(t_max > 0.0)) throw ConfigError("s_lambda: t_max must be positive");
  if (!(ell > 0.0)) throw ConfigError("s_lambda: ell must be positive");
  if (!(snapshot_interval > 0.0) || snapshot_interval > 0.1 + 1e-12) {
    throw ConfigError("s_lambda: snapshot interval must lie in (0, 0.1]");
  }
  if (substeps < 1) throw ConfigError("s_lambda: substeps must be >= 1");
  if (taylor_order < 2 || taylor_order > 12) {
    throw ConfigError("s_lambda: taylor_order must lie in [2, 12]");
  }
  if (!(mode_threshold > 0.0 && mode_threshold < 1.0)) {
    throw ConfigError("s_lambda: mode_threshold must lie in (0, 1)");
  }
  integrator.validate();
}

double SLambdaPath::at(double t) const {
  if (times.empty() || t < times.front() || t > times.back()) {
    throw std::out_of_range("SLambdaPath: time outside the path");
  }
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
  if (i + 1 == times.size()) return positions.back();
  const double w = (t - times[i]) / (times[i + 1] - times[i]);
  return positions[i] + w * (positions[i + 1] - positions[i]);
}

RoughSpec s_lambda_spec(double lambda, double t_max, std::uint64_t seed,
                        double ell, double spacing) {
  (void)lambda;
  RoughSpec spec;
  const double length = std::max(20.0 * std::sqrt(t_max), 64.0 * ell);
  spec.spacing = spacing;
  spec.sites = 2 * static_cast<int>(std::ceil(length / spacing / 2.0));
  spec.seed = seed;
  spec.max_wavenumber = std::sqrt(-std::log(1e-8)) / ell;
  return spec;
}

namespace {

// Local Taylor coefficients, in space, of snapshots of u_ℓ, with a short
// history for interpolation in time.
class JetStream {
 public:
  JetStream(const RoughSpec& spec, const SLambdaConfig& cfg)
      : modes_(spec), cfg_(cfg), step_(cfg.snapshot_interval / cfg.substeps) {
    const double length = modes_.length();
    norm_ = std::sqrt(2.0 / length);
    zero_ = modes_.zero_amp() / std::sqrt(length);
    for (int m = 0; m < modes_.mode_count(); ++m) {
      const double k = modes_.wave_number(m);
      const double w = std::exp(-k * k * cfg.ell * cfg.ell);
      if (w < cfg.mode_threshold) break;
      multiplier_.push_back(w);
    }
    factorial_.assign(cfg.taylor_order + 1, 1.0);
    for (int j = 1; j <= cfg.taylor_order; ++j) factorial_[j] = factorial_[j - 1] * j;
    push_current(0);
    push_backward(spec.seed);
  }

  double value(double t, double x) {
    const double h = cfg_.snapshot_interval;
    const long n = static_cast<long>(std::floor(t / h));
    const double s = t / h - static_cast<double>(n);
    while (last_index() < n + 2) generate_next();
    if (first_index() > n - 1) throw std::logic_error("JetStream: history exhausted");
    while (first_index() < n - 4) slots_.pop_front();
    if (std::abs(x - center_) > cfg_.recenter_radius) recenter(x);
    const double dx = x - center_;
    double p[4];
    for (int i = 0; i < 4; ++i) p[i] = evaluate(slot(n - 1 + i), dx);
    const double s2 = s * s;
    const double s3 = s2 * s;
    return 0.5 * (2.0 * p[1] + (p[2] - p[0]) * s +
                  (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * s2 +
                  (-p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3]) * s3);
  }

  int kept_modes() const { return static_cast<int>(multiplier_.size()); }

 private:
  struct Slot {
    long index;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> coef;  // j-th derivative at the centre divided by j!
  };

  long first_index() const { return slots_.front().index; }
  long last_index() const { return slots_.back().index; }
  const Slot& slot(long index) const {
    return slots_[static_cast<std::size_t>(index - first_index())];
  }

  void generate_next() {
    for (int i = 0; i < cfg_.substeps; ++i) modes_.advance(step_);
    push_current(last_index() + 1);
  }

  // Snapshot -1 at t = -interval: one OU step from snapshot 0 on its own
  // stream (the stationary OU process is reversible).
  void push_backward(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32), 0xbac4u};
    std::mt19937_64 rng(seq);
    boost::random::normal_distribution<double> normal;
    Slot s = slots_.front();
    s.index = -1;
    const double h = cfg_.snapshot_interval;
    for (std::size_t m = 0; m < s.a.size(); ++m) {
      const double k = modes_.wave_number(static_cast<int>(m));
      const double decay = std::exp(-k * k * h);
      const double noise = std::sqrt(-std::expm1(-2.0 * k * k * h));
      s.a[m] = decay * s.a[m] + noise * normal(rng);
      s.b[m] = decay * s.b[m] + noise * normal(rng);
    }
    s.coef = coefficients(s.a, s.b);
    slots_.push_front(std::move(s));
  }

  void push_current(long index) {
    Slot s;
    s.index = index;
    const std::size_t kept = multiplier_.size();
    s.a.assign(modes_.cos_amp().begin(), modes_.cos_amp().begin() + kept);
    s.b.assign(modes_.sin_amp().begin(), modes_.sin_amp().begin() + kept);
    s.coef = coefficients(s.a, s.b);
    slots_.push_back(std::move(s));
  }

  std::vector<double> coefficients(const std::vector<double>& a,
                                   const std::vector<double>& b) const {
    const int order = cfg_.taylor_order;
    std::vector<double> d(order + 1, 0.0);
    const double k1 = modes_.base_wave_number();
    const double c1 = std::cos(k1 * center_);
    const double s1 = std::sin(k1 * center_);
    double c = 1.0;
    double s = 0.0;
    for (std::size_t m = 0; m < multiplier_.size(); ++m) {
      const double cn = c * c1 - s * s1;
      s = s * c1 + c * s1;
      c = cn;
      const double k = k1 * static_cast<double>(m + 1);
      const double even = multiplier_[m] * (a[m] * c + b[m] * s);
      const double odd = multiplier_[m] * (b[m] * c - a[m] * s);
      double kp = 1.0;
      for (int j = 0; j <= order; ++j) {
        // d^j/dx^j of (a cos kx + b sin kx) cycles through even, odd, -even, -odd.
        const double base = (j % 2 == 0) ? even : odd;
        const double sign = ((j / 2) % 2 == 0) ? 1.0 : -1.0;
        d[j] += sign * kp * base;
        kp *= k;
      }
    }
    for (int j = 0; j <= order; ++j) d[j] *= norm_ / factorial_[j];
    d[0] += zero_;
    return d;
  }

  double evaluate(const Slot& s, double dx) const {
    double v = 0.0;
    for (int j = cfg_.taylor_order; j >= 0; --j) v = v * dx + s.coef[j];
    return v;
  }

  void recenter(double x) {
    center_ = x;
    for (Slot& s : slots_) s.coef = coefficients(s.a, s.b);
  }

  RoughModes modes_;
  SLambdaConfig cfg_;
  double step_;
  double norm_ = 0.0;
  double zero_ = 0.0;
  double center_ = 0.0;
  std::vector<double> multiplier_;
  std::vector<double> factorial_;
  std::deque<Slot> slots_;
};

}  // namespace

SLambdaPath integrate_s_lambda(const RoughSpec& spec, const SLambdaConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (spec.spacing > 0.25) throw ConfigError("s_lambda: spacing must be <= 1/4");
  if (spec.length() < 20.0 * std::sqrt(cfg.t_max)) {
    throw ConfigError("s_lambda: N * spacing must be >= 20 sqrt(t_max)");
  }
  if (cfg.ell < 4.0 * spec.spacing) {
    throw ConfigError("s_lambda: ell must be at least 4 lattice spacings");
  }
  SLambdaPath out;
  out.lambda = cfg.lambda;
  out.times.push_back(0.0);
  out.positions.push_back(0.0);
  const double h = cfg.snapshot_interval;
  const auto n = static_cast<long>(std::floor(cfg.t_max / h + 1e-9));
  if (cfg.lambda == 0.0) {
    for (long i = 1; i <= n; ++i) {
      out.times.push_back(static_cast<double>(i) * h);
      out.positions.push_back(0.0);
    }
    return out;
  }
  JetStream stream(spec, cfg);
  IntegratorConfig icfg = cfg.integrator;
  icfg.max_step = h;
  const double lambda = cfg.lambda;
  const ScalarRhs rhs = [&stream, lambda](double t, double x) {
    return lambda * stream.value(t, x);
  };
  double x = 0.0;
  for (long i = 0; i < n; ++i) {
    const double t0 = static_cast<double>(i) * h;
    const double t1 = static_cast<double>(i + 1) * h;
    const TracerResult r = integrate_ode(rhs, x, t0, t1, icfg);
    if (!r.ok()) {
      out.error = *r.error;
      return out;
    }
    x = r.path.back_position();
    out.times.push_back(t1);
    out.positions.push_back(x);
  }
  return out;
}

}  // namespace heattracer
