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

#include "heattracer/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace heattracer {

MeanEstimate mean_estimate(std::span<const double> values) {
  MeanEstimate e;
  e.n = values.size();
  if (e.n == 0) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(e.n);
  if (e.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.se = std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
  }
  return e;
}

MeanEstimate second_moment(std::span<const double> values) {
  std::vector<double> sq;
  sq.reserve(values.size());
  for (double v : values) sq.push_back(v * v);
  return mean_estimate(sq);
}

MeanEstimate product_moment(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("product_moment: size mismatch");
  std::vector<double> prod(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) prod[i] = a[i] * b[i];
  return mean_estimate(prod);
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    constexpr double pi = std::numbers::pi;
    const double c = -pi * pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int j = 1; j <= 6; ++j) {
      const double k = 2.0 * j - 1.0;
      sum += std::exp(c * k * k);
    }
    return 1.0 - std::sqrt(2.0 * pi) / lambda * sum;
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double ks_p_value(double d, double n_eff) {
  const double root = std::sqrt(n_eff);
  return kolmogorov_q((root + 0.12 + 0.11 / root) * d);
}

}  // namespace

KsResult ks_one_sample(std::span<const double> samples,
                       const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < x.size()) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(j) / n - f, f - static_cast<double>(i) / n});
    i = j;
  }
  return {d, ks_p_value(d, n)};
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j == y.size() || (i < x.size() && x[i] <= y[j])) {
      v = x[i];
    } else {
      v = y[j];
    }
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return {d, ks_p_value(d, n * m / (n + m))};
}

double normal_cdf(double x, double variance) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

ExponentFit fit_exponent(std::span<const double> t, std::span<const double> m,
                         std::span<const double> weights, double confidence,
                         double min_decades) {
  if (t.size() != m.size() || (!weights.empty() && weights.size() != t.size())) {
    throw std::invalid_argument("fit_exponent: size mismatch");
  }
  if (t.size() < 5) throw FitError("fit_exponent: need at least 5 points");
  double tmin = std::numeric_limits<double>::infinity();
  double tmax = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || !(m[i] > 0.0)) {
      throw FitError("fit_exponent: times and moments must be positive");
    }
    tmin = std::min(tmin, t[i]);
    tmax = std::max(tmax, t[i]);
  }
  if (std::log10(tmax / tmin) < min_decades - 1e-12) {
    throw FitError("fit_exponent: points span less than the required decades");
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    sw += w;
    sx += w * std::log(t[i]);
    sy += w * std::log(m[i]);
  }
  const double xbar = sx / sw;
  const double ybar = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const double dx = std::log(t[i]) - xbar;
    sxx += w * dx * dx;
    sxy += w * dx * (std::log(m[i]) - ybar);
  }
  ExponentFit fit;
  fit.points = t.size();
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double rss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const double r = std::log(m[i]) - fit.intercept - fit.slope * std::log(t[i]);
    rss += w * r * r;
  }
  const double dof = static_cast<double>(t.size()) - 2.0;
  const double s2 = rss / dof;
  fit.slope_se = std::sqrt(s2 / sxx);
  fit.intercept_se = std::sqrt(s2 * (1.0 / sw + xbar * xbar / sxx));
  const boost::math::students_t dist(dof);
  const double q = boost::math::quantile(dist, 0.5 + 0.5 * confidence);
  fit.ci_low = fit.slope - q * fit.slope_se;
  fit.ci_high = fit.slope + q * fit.slope_se;
  return fit;
}

double tail_limit(std::span<const double> samples, std::size_t min_tail) {
  if (samples.size() < min_tail || min_tail == 0) {
    throw FitError("tail_limit: fewer samples than the required tail");
  }
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  return x[x.size() - min_tail];
}

TailFit tail_fit(std::span<const double> samples, double z_lo, double z_hi,
                 int grid_points, std::size_t min_tail) {
  if (!(z_hi > z_lo) || grid_points < 3) throw std::invalid_argument("tail_fit: bad range");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  auto survival = [&x](double z) {
    const auto it = std::lower_bound(x.begin(), x.end(), z);
    return static_cast<std::size_t>(x.end() - it);
  };
  TailFit fit;
  fit.z_lo = z_lo;
  fit.z_hi = z_hi;
  fit.tail_count = survival(z_hi);
  if (fit.tail_count < min_tail) {
    throw FitError("tail_fit: fewer than " + std::to_string(min_tail) +
                   " samples beyond the range");
  }
  std::vector<double> zs(grid_points), ys(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    zs[i] = z_lo + (z_hi - z_lo) * i / (grid_points - 1);
    ys[i] = std::log(static_cast<double>(survival(zs[i])) / n);
  }
  double zbar = 0.0, ybar = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    zbar += zs[i];
    ybar += ys[i];
  }
  zbar /= grid_points;
  ybar /= grid_points;
  double szz = 0.0, szy = 0.0, syy = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    szz += (zs[i] - zbar) * (zs[i] - zbar);
    szy += (zs[i] - zbar) * (ys[i] - ybar);
    syy += (ys[i] - ybar) * (ys[i] - ybar);
  }
  const double slope = szy / szz;
  fit.rate = -slope;
  fit.intercept = ybar - slope * zbar;
  double rss = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    const double r = ys[i] - (fit.intercept + slope * zs[i]);
    rss += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  return fit;
}

namespace {

std::vector<double> histogram_density(const std::vector<double>& x, double lo,
                                      double hi, int bins) {
  std::vector<double> counts(bins, 0.0);
  const double width = (hi - lo) / bins;
  for (double v : x) {
    int b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    counts[b] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(x.size()) * width;
  return counts;
}

}  // namespace

Histogram density_histogram(std::span<const double> samples, int bins) {
  if (samples.empty() || bins < 1) throw std::invalid_argument("density_histogram: bad input");
  std::vector<double> x(samples.begin(), samples.end());
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  Histogram h;
  h.lo = *mn;
  h.hi = *mx;
  if (h.hi == h.lo) {
    h.lo -= 0.5;
    h.hi += 0.5;
  }
  h.density = histogram_density(x, h.lo, h.hi, bins);
  const auto doubled = histogram_density(x, h.lo, h.hi, 2 * bins);
  h.max_height = *std::max_element(h.density.begin(), h.density.end());
  h.max_height_doubled = *std::max_element(doubled.begin(), doubled.end());
  h.doubling_ratio = h.max_height_doubled / h.max_height;
  return h;
}

KinkFit fit_kink(std::span<const double> t, std::span<const double> m,
                 double slope_before, double slope_after,
                 std::span<const double> weights) {
  if (t.size() != m.size() || t.size() < 3) throw FitError("fit_kink: need >= 3 points");
  std::vector<double> x(t.size()), y(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || !(m[i] > 0.0)) throw FitError("fit_kink: non-positive data");
    x[i] = std::log(t[i]);
    y[i] = std::log(m[i]);
  }
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  KinkFit best;
  best.residual = std::numeric_limits<double>::infinity();
  const int grid = 2000;
  for (int g = 0; g <= grid; ++g) {
    const double xc = *xmin + (*xmax - *xmin) * g / grid;
    double sw = 0.0, sr = 0.0;
    std::vector<double> shape(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      shape[i] = x[i] < xc ? slope_before * x[i]
                           : slope_before * xc + slope_after * (x[i] - xc);
      const double w = weights.empty() ? 1.0 : weights[i];
      sw += w;
      sr += w * (y[i] - shape[i]);
    }
    const double a = sr / sw;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double w = weights.empty() ? 1.0 : weights[i];
      const double r = y[i] - a - shape[i];
      rss += w * r * r;
    }
    if (rss < best.residual) best = {std::exp(xc), a, rss};
  }
  return best;
}

}  // namespace heattracer
