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

#include "heattracer/cadlag.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace heattracer {

void CadlagPath::push(double t, double value) {
  if (!times_.empty() && !(t > times_.back())) {
    throw std::invalid_argument("CadlagPath: breakpoints must increase");
  }
  double left = value;
  if (interpolation_ == Interpolation::kPiecewiseConstant && !values_.empty()) {
    left = values_.back();
  }
  times_.push_back(t);
  values_.push_back(value);
  left_limits_.push_back(left);
}

void CadlagPath::push_jump(double t, double left, double right) {
  if (times_.empty()) {
    throw std::invalid_argument("CadlagPath: a path cannot start with a jump");
  }
  if (!(t > times_.back())) {
    throw std::invalid_argument("CadlagPath: breakpoints must increase");
  }
  if (interpolation_ == Interpolation::kPiecewiseConstant) left = values_.back();
  times_.push_back(t);
  values_.push_back(right);
  left_limits_.push_back(left);
}

CadlagPath CadlagPath::from_samples(std::span<const double> times,
                                    std::span<const double> values,
                                    Interpolation interpolation) {
  if (times.size() != values.size() || times.empty()) {
    throw std::invalid_argument("CadlagPath::from_samples: size mismatch");
  }
  CadlagPath path(interpolation);
  for (std::size_t i = 0; i < times.size(); ++i) path.push(times[i], values[i]);
  return path;
}

std::vector<double> CadlagPath::jump_times() const {
  std::vector<double> out;
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (is_jump(i)) out.push_back(times_[i]);
  }
  return out;
}

double CadlagPath::operator()(double t) const {
  if (times_.empty() || t < times_.front() || t > times_.back()) {
    throw std::out_of_range("CadlagPath: time outside the domain");
  }
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
  if (t == times_[i] || i + 1 == times_.size()) return values_[i];
  if (interpolation_ == Interpolation::kPiecewiseConstant) return values_[i];
  const double w = (t - times_[i]) / (times_[i + 1] - times_[i]);
  return values_[i] + w * (left_limits_[i + 1] - values_[i]);
}

double CadlagPath::left_limit(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it != times_.end() && *it == t) {
    return left_limits_[static_cast<std::size_t>(it - times_.begin())];
  }
  return (*this)(t);
}

std::vector<double> CadlagPath::window_vertices(TimeWindow w) const {
  std::vector<double> out;
  out.push_back((*this)(w.start));
  auto it = std::upper_bound(times_.begin(), times_.end(), w.start);
  for (; it != times_.end() && *it <= w.end; ++it) {
    const std::size_t i = static_cast<std::size_t>(it - times_.begin());
    out.push_back(left_limits_[i]);
    out.push_back(values_[i]);
  }
  out.push_back((*this)(w.end));
  return out;
}

void CadlagPath::write_csv(std::ostream& os) const {
  os << "t,value,left_limit,is_jump\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < times_.size(); ++i) {
    os << times_[i] << ',' << values_[i] << ',' << left_limits_[i] << ','
       << (is_jump(i) ? 1 : 0) << '\n';
  }
}

double segment_distance(double a, double b, double c) {
  const double lo = std::min(b, c);
  const double hi = std::max(b, c);
  if (a < lo) return lo - a;
  if (a > hi) return a - hi;
  return 0.0;
}

TimeWindow clip_window(const CadlagPath& f, const CadlagPath& g, double t,
                       double delta) {
  TimeWindow w{std::max({t - delta, f.start(), g.start()}),
               std::min({t + delta, f.end(), g.end()})};
  if (w.start > w.end) throw std::out_of_range("window outside the domain");
  return w;
}

double oscillation_v(const CadlagPath& f, const CadlagPath& g, double t,
                     double delta) {
  const TimeWindow w = clip_window(f, g, t, delta);
  const auto vf = f.window_vertices(w);
  const auto vg = g.window_vertices(w);
  const auto [fmin, fmax] = std::minmax_element(vf.begin(), vf.end());
  const auto [gmin, gmax] = std::minmax_element(vg.begin(), vg.end());
  return std::max(*fmax - *gmin, *gmax - *fmin);
}

double oscillation_ws(const CadlagPath& f, double t, double delta) {
  const TimeWindow w = clip_window(f, f, t, delta);
  const auto x = f.window_vertices(w);
  const std::size_t n = x.size();
  if (n < 3) return 0.0;
  std::vector<double> suf_min(n), suf_max(n);
  suf_min[n - 1] = suf_max[n - 1] = x[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    suf_min[k] = std::min(suf_min[k + 1], x[k]);
    suf_max[k] = std::max(suf_max[k + 1], x[k]);
  }
  double best = 0.0;
  double pre_min = x[0];
  double pre_max = x[0];
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double over = x[j] - std::max(pre_min, suf_min[j + 1]);
    const double under = std::min(pre_max, suf_max[j + 1]) - x[j];
    best = std::max({best, over, under});
    pre_min = std::min(pre_min, x[j]);
    pre_max = std::max(pre_max, x[j]);
  }
  return best;
}

double oscillation_ws_bruteforce(const CadlagPath& f, double t, double delta) {
  const TimeWindow w = clip_window(f, f, t, delta);
  const auto x = f.window_vertices(w);
  double best = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      for (std::size_t k = j + 1; k < x.size(); ++k) {
        best = std::max(best, segment_distance(x[j], x[i], x[k]));
      }
    }
  }
  return best;
}

double uniform_distance(const CadlagPath& f, const CadlagPath& g) {
  const double lo = std::max(f.start(), g.start());
  const double hi = std::min(f.end(), g.end());
  if (lo > hi) throw std::out_of_range("uniform_distance: disjoint domains");
  std::vector<double> grid{lo, hi};
  for (const CadlagPath* p : {&f, &g}) {
    for (double t : p->times()) {
      if (t >= lo && t <= hi) grid.push_back(t);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  double best = 0.0;
  for (double t : grid) {
    best = std::max(best, std::abs(f(t) - g(t)));
    if (t > lo) best = std::max(best, std::abs(f.left_limit(t) - g.left_limit(t)));
  }
  return best;
}

namespace {

struct GraphPoint {
  double t;
  double x;
};

std::vector<GraphPoint> graph_vertices(const CadlagPath& f) {
  std::vector<GraphPoint> out;
  out.push_back({f.times()[0], f.values()[0]});
  for (std::size_t i = 1; i < f.size(); ++i) {
    out.push_back({f.times()[i], f.left_limits()[i]});
    if (f.is_jump(i)) out.push_back({f.times()[i], f.values()[i]});
  }
  return out;
}

std::vector<GraphPoint> refine(const std::vector<GraphPoint>& v, int level) {
  const int parts = 1 << level;
  std::vector<GraphPoint> out;
  out.reserve((v.size() - 1) * parts + 1);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    for (int k = 0; k < parts; ++k) {
      const double w = static_cast<double>(k) / parts;
      out.push_back({v[i].t + w * (v[i + 1].t - v[i].t),
                     v[i].x + w * (v[i + 1].x - v[i].x)});
    }
  }
  out.push_back(v.back());
  return out;
}

}  // namespace

double m1_upper_bound(const CadlagPath& f, const CadlagPath& g, int n_param) {
  if (f.empty() || g.empty()) throw std::invalid_argument("m1_upper_bound: empty path");
  const auto vf = graph_vertices(f);
  const auto vg = graph_vertices(g);
  const std::size_t segments = std::max(vf.size(), vg.size()) - 1;
  int level = 0;
  while (level < 20 && segments > 0 &&
         segments * (std::size_t{1} << (level + 1)) + 1 <=
             static_cast<std::size_t>(std::max(n_param, 0))) {
    ++level;
  }
  const auto a = refine(vf, level);
  const auto b = refine(vg, level);
  auto dist = [&](std::size_t i, std::size_t j) {
    return std::max(std::abs(a[i].t - b[j].t), std::abs(a[i].x - b[j].x));
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(b.size(), inf), cur(b.size(), inf);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double reach;
      if (i == 0 && j == 0) {
        reach = 0.0;
      } else {
        reach = inf;
        if (i > 0) reach = std::min(reach, prev[j]);
        if (j > 0) reach = std::min(reach, cur[j - 1]);
        if (i > 0 && j > 0) reach = std::min(reach, prev[j - 1]);
      }
      cur[j] = std::max(reach, dist(i, j));
    }
    std::swap(prev, cur);
  }
  return prev.back();
}

}  // namespace heattracer
