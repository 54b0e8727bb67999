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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "heattracer/errors.hpp"
#include "heattracer/rough_env.hpp"

namespace heattracer {

void CrossoverConfig::validate(std::span<const double> lambdas) const {
  if (lambdas.empty()) throw ConfigError("crossover: empty lambda list");
  for (double l : lambdas) {
    if (!(l > 0.0 && l <= 1.0)) throw ConfigError("crossover: lambda must lie in (0, 1]");
  }
  if (paths.empty() || (paths.size() != 1 && paths.size() != lambdas.size())) {
    throw ConfigError("crossover: paths must have one entry or one per lambda");
  }
  for (std::size_t n : paths) {
    if (n == 0) throw ConfigError("crossover: path counts must be positive");
  }
  if (!(t_max_factor >= 10.0)) throw ConfigError("crossover: t_max_factor must be >= 10");
  if (!(t_min > 0.0 && t_min <= 1.0)) throw ConfigError("crossover: t_min must lie in (0, 1]");
  if (points_per_decade < 2) throw ConfigError("crossover: points_per_decade must be >= 2");
  if (workers < 1) throw ConfigError("crossover: workers must be >= 1");
  path.validate();
}

namespace {

std::vector<double> moment_grid(double t_min, double t_max, int per_decade,
                                std::initializer_list<double> extra) {
  std::vector<double> grid;
  const double decades = std::log10(t_max / t_min);
  const int n = static_cast<int>(std::ceil(decades * per_decade));
  for (int i = 0; i <= n; ++i) {
    grid.push_back(std::min(t_max, t_min * std::pow(10.0, static_cast<double>(i) / per_decade)));
  }
  for (double e : extra) {
    if (e >= t_min && e <= t_max) grid.push_back(e);
  }
  std::sort(grid.begin(), grid.end());
  std::vector<double> out;
  for (double t : grid) {
    if (out.empty() || t > out.back() * (1.0 + 1e-9)) out.push_back(t);
  }
  return out;
}

WindowFit window_fit(const LambdaCrossover& c, double lo, double hi,
                     double min_decades) {
  WindowFit w;
  w.t_lo = lo;
  w.t_hi = hi;
  std::vector<double> t, m, wt;
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    const double ti = c.times[i];
    if (ti < lo * (1.0 - 1e-9) || ti > hi * (1.0 + 1e-9)) continue;
    const MeanEstimate& e = c.second_moment[i];
    t.push_back(ti);
    m.push_back(e.mean);
    wt.push_back(e.se > 0.0 ? (e.mean / e.se) * (e.mean / e.se) : 1.0);
  }
  try {
    w.fit = fit_exponent(t, m, wt, 0.95, min_decades);
  } catch (const FitError& e) {
    w.skipped = e.what();
  }
  return w;
}

std::optional<double> free_form_d(const LambdaCrossover& c, double lo, double hi,
                                  double ell) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    if (c.times[i] >= lo * (1.0 - 1e-9) && c.times[i] <= hi * (1.0 + 1e-9)) idx.push_back(i);
  }
  if (idx.size() < 4) return std::nullopt;
  Eigen::MatrixXd a(idx.size(), 3);
  Eigen::VectorXd b(idx.size());
  const double l2 = c.lambda * c.lambda;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const MeanEstimate& e = c.second_moment[idx[r]];
    const double w = e.se > 0.0 ? l2 / e.se : 1.0;
    const double s = c.times[idx[r]] + 2.0 * ell * ell;
    a(r, 0) = w * s * std::sqrt(s);
    a(r, 1) = w * s;
    a(r, 2) = w;
    b(r) = w * e.mean / l2;
  }
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
  return x(0);
}

}  // namespace

CrossoverReport crossover_report(std::span<const double> lambdas,
                                 const CrossoverConfig& cfg) {
  cfg.validate(lambdas);
  CrossoverReport report;
  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    LambdaCrossover c;
    c.lambda = lambdas[j];
    const double scale = std::pow(c.lambda, -4.0);
    c.t_max = cfg.t_max_factor * scale;
    c.paths = cfg.paths.size() == 1 ? cfg.paths[0] : cfg.paths[j];
    c.times = moment_grid(cfg.t_min, c.t_max, cfg.points_per_decade,
                          {1.0, 0.25 * scale, 4.0 * scale});

    SLambdaConfig pc = cfg.path;
    pc.lambda = c.lambda;
    pc.t_max = c.t_max;
    EnsembleOptions opt;
    opt.n_env = c.paths;
    opt.base_seed = cfg.base_seed;
    opt.workers = cfg.workers;
    const auto outcome = run_ensemble(opt, [&](std::size_t, std::uint64_t seed) {
      const RoughSpec spec = s_lambda_spec(c.lambda, c.t_max, seed, pc.ell, cfg.spacing);
      const SLambdaPath p = integrate_s_lambda(spec, pc);
      if (p.error) throw TraceError(*p.error);
      std::vector<double> s(c.times.size());
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = p.at(c.times[i]);
      return s;
    });
    c.failures = outcome.failures;
    const auto samples = outcome.successes();
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      std::vector<double> col;
      col.reserve(samples.size());
      for (const auto& s : samples) col.push_back(s[i]);
      c.second_moment.push_back(second_moment(col));
    }

    c.sub_diffusive = window_fit(c, 1.0, 0.25 * scale, cfg.min_decades);
    c.diffusive = window_fit(c, 4.0 * scale, c.t_max, cfg.min_decades);

    const auto top = std::find_if(c.times.begin(), c.times.end(), [&](double t) {
      return std::abs(t - 0.25 * scale) <= 1e-9 * t;
    });
    if (top != c.times.end()) {
      const auto& e = c.second_moment[top - c.times.begin()];
      const double norm = c.lambda * c.lambda * std::pow(*top, 1.5);
      c.d_estimate_time = *top;
      c.d_estimate = e.mean / norm;
      c.d_estimate_se = e.se / norm;
    }
    c.d_free_form = free_form_d(c, 1.0, 0.25 * scale, pc.ell);

    std::vector<double> kt, km, kw;
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      if (c.times[i] < 1.0 - 1e-9) continue;
      const MeanEstimate& e = c.second_moment[i];
      kt.push_back(c.times[i]);
      km.push_back(e.mean);
      kw.push_back(e.se > 0.0 ? (e.mean / e.se) * (e.mean / e.se) : 1.0);
    }
    c.kink = fit_kink(kt, km, 1.5, 1.0, kw);

    double sum = 0.0, var = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      if (c.times[i] < 4.0 * scale * (1.0 - 1e-9)) continue;
      sum += c.second_moment[i].mean / c.times[i];
      var += c.second_moment[i].se / c.times[i];
      ++n;
    }
    if (n > 0) {
      // SE of the window mean: mean of the per-time SEs.
      c.diffusivity = {sum / n, var / n, n};
    }
    report.per_lambda.push_back(std::move(c));
  }
  for (std::size_t a = 0; a < report.per_lambda.size(); ++a) {
    for (std::size_t b = a + 1; b < report.per_lambda.size(); ++b) {
      const MeanEstimate& x = report.per_lambda[a].diffusivity;
      const MeanEstimate& y = report.per_lambda[b].diffusivity;
      const double se = std::hypot(x.se, y.se);
      if (se > 0.0) report.collapse_z = std::max(report.collapse_z, std::abs(x.mean - y.mean) / se);
    }
  }
  return report;
}

}  // namespace heattracer
