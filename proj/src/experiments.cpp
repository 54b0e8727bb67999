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

#include "heattracer/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>
#include <type_traits>

#include "heattracer/cadlag.hpp"
#include "heattracer/errors.hpp"
#include "heattracer/stats.hpp"

namespace heattracer {

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string CsvTable::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
  return os.str();
}

EnvironmentSpec EnvironmentConfig::spec(std::uint64_t seed) const {
  EnvironmentSpec s;
  s.domain_length = domain_length;
  s.mode_count = mode_count;
  s.seed = seed;
  s.zero_mode = zero_mode;
  return s;
}

namespace {

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + "expected a JSON object");
  }

  template <class T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(where(key) + "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(where(key) + "expected an integer");
      if (std::is_unsigned_v<T> && !it->is_number_unsigned()) {
        throw ConfigError(where(key) + "expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(where(key) + "expected a number");
    }
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where(key) + "wrong type");
    }
  }

  void read_numbers(const std::string& key, std::vector<double>& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_array()) throw ConfigError(where(key) + "expected an array of numbers");
    std::vector<double> v;
    for (const auto& e : *it) {
      if (!e.is_number()) throw ConfigError(where(key) + "expected an array of numbers");
      v.push_back(e.get<double>());
    }
    out = std::move(v);
  }

  /// Returns the object under key, or an empty object.
  const Json& child(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? empty() : *it;
  }
  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(where(item.key()) + "unknown key");
    }
  }

  std::string where(const std::string& key) const {
    std::string p = path_;
    if (!key.empty()) p = p.empty() ? key : p + "." + key;
    return p.empty() ? std::string("config: ") : "config " + p + ": ";
  }

 private:
  static const Json& empty() {
    static const Json e = Json::object();
    return e;
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_ensemble(Reader& r, EnsembleSettings& e) {
  r.read("n_env", e.n_env);
  r.read("base_seed", e.base_seed);
  r.read("workers", e.workers);
  if (e.n_env == 0) throw ConfigError(r.where("n_env") + "must be positive");
  if (e.workers < 1) throw ConfigError(r.where("workers") + "must be >= 1");
}

void read_environment(Reader& parent, EnvironmentConfig& e) {
  Reader r(parent.child("environment"), parent.child_path("environment"));
  r.read("domain_length", e.domain_length);
  r.read("mode_count", e.mode_count);
  std::string zm = e.zero_mode == ZeroMode::kIncluded ? "included" : "excluded";
  r.read("zero_mode", zm);
  if (zm == "included") {
    e.zero_mode = ZeroMode::kIncluded;
  } else if (zm == "excluded") {
    e.zero_mode = ZeroMode::kExcluded;
  } else {
    throw ConfigError(r.where("zero_mode") + "must be \"included\" or \"excluded\"");
  }
  r.finish();
  e.spec(0).validate();
}

void read_integrator(Reader& parent, IntegratorConfig& c) {
  Reader r(parent.child("integrator"), parent.child_path("integrator"));
  r.read("rel_tol", c.rel_tol);
  r.read("abs_tol", c.abs_tol);
  r.read("max_step", c.max_step);
  r.read("t_init_factor", c.t_init_factor);
  r.read("min_init_time", c.min_init_time);
  r.read("control_dense_residual", c.control_dense_residual);
  r.read("max_steps", c.max_steps);
  r.finish();
  c.validate();
}

void require_domain(const EnvironmentConfig& e, double t_max) {
  if (e.domain_length < 10.0 * std::sqrt(t_max)) {
    throw ConfigError("config environment.domain_length: must be at least 10 sqrt(t_max) = " +
                      std::to_string(10.0 * std::sqrt(t_max)));
  }
}

Json ensemble_json(const EnsembleSettings& e) {
  return {{"n_env", e.n_env}, {"base_seed", e.base_seed}, {"workers", e.workers}};
}

Json environment_json(const EnvironmentConfig& e) {
  return {{"domain_length", e.domain_length},
          {"mode_count", e.mode_count},
          {"zero_mode", e.zero_mode == ZeroMode::kIncluded ? "included" : "excluded"}};
}

Json integrator_json(const IntegratorConfig& c) {
  return {{"rel_tol", c.rel_tol},
          {"abs_tol", c.abs_tol},
          {"max_step", c.max_step},
          {"t_init_factor", c.t_init_factor},
          {"min_init_time", c.min_init_time},
          {"control_dense_residual", c.control_dense_residual},
          {"max_steps", c.max_steps}};
}

void merge(Json& into, const Json& from) {
  for (const auto& item : from.items()) into[item.key()] = item.value();
}

Json failures_json(const std::vector<std::pair<std::size_t, std::string>>& f,
                   std::uint64_t base_seed) {
  Json out = Json::array();
  for (const auto& [i, msg] : f) {
    out.push_back({{"index", i}, {"seed", base_seed + i}, {"message", msg}});
  }
  return out;
}

Json fit_json(const ExponentFit& f) {
  return {{"slope", f.slope},       {"slope_se", f.slope_se},
          {"intercept", f.intercept}, {"intercept_se", f.intercept_se},
          {"ci", {f.ci_low, f.ci_high}}, {"points", f.points}};
}

Json ks_json(const KsResult& k) {
  return {{"statistic", k.statistic}, {"p_value", k.p_value}};
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t j) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

}  // namespace

SampleEnvConfig parse_sample_env(const Json& j) {
  SampleEnvConfig c;
  Reader r(j, "");
  read_ensemble(r, c.ensemble);
  read_environment(r, c.environment);
  const Json& probes = r.child("probes");
  if (!probes.is_object() || !probes.empty()) {
    if (!probes.is_array() || probes.empty()) {
      throw ConfigError("config probes: expected a non-empty array of [t_a, x_a, t_b, x_b]");
    }
    c.probes.clear();
    for (const auto& p : probes) {
      if (!p.is_array() || p.size() != 4 ||
          !std::all_of(p.begin(), p.end(), [](const Json& v) { return v.is_number(); })) {
        throw ConfigError("config probes: each probe must be [t_a, x_a, t_b, x_b]");
      }
      c.probes.push_back({{p[0].get<double>(), p[1].get<double>()},
                          {p[2].get<double>(), p[3].get<double>()}});
    }
  }
  r.read("snapshot_time", c.snapshot_time);
  r.read("snapshot_points", c.snapshot_points);
  r.finish();
  const double floor = c.environment.spec(0).time_floor();
  double t_max = c.snapshot_time;
  for (const ProbePair& p : c.probes) {
    if (p.a.t < floor || p.b.t < floor) {
      throw ConfigError("config probes: times must be at least the lattice floor " +
                        std::to_string(floor));
    }
    t_max = std::max({t_max, p.a.t, p.b.t});
  }
  if (c.snapshot_time < floor) throw ConfigError("config snapshot_time: below the lattice floor");
  if (c.snapshot_points < 2) throw ConfigError("config snapshot_points: must be >= 2");
  require_domain(c.environment, t_max);
  return c;
}

Json to_json(const SampleEnvConfig& c) {
  Json j = ensemble_json(c.ensemble);
  j["environment"] = environment_json(c.environment);
  Json probes = Json::array();
  for (const ProbePair& p : c.probes) probes.push_back({p.a.t, p.a.x, p.b.t, p.b.x});
  j["probes"] = probes;
  j["snapshot_time"] = c.snapshot_time;
  j["snapshot_points"] = c.snapshot_points;
  return j;
}

ShortTimeConfig parse_short_time(const Json& j) {
  ShortTimeConfig c;
  Reader r(j, "");
  read_ensemble(r, c.ensemble);
  read_environment(r, c.environment);
  r.read("T", c.T);
  r.read_numbers("theta", c.theta);
  r.read("fit_t_lo", c.fit_t_lo);
  r.read("fit_t_hi", c.fit_t_hi);
  r.read("fit_points", c.fit_points);
  read_integrator(r, c.integrator);
  r.finish();
  if (!(c.T > 0.0)) throw ConfigError("config T: must be positive");
  if (c.theta.empty()) throw ConfigError("config theta: must not be empty");
  for (std::size_t i = 0; i < c.theta.size(); ++i) {
    if (!(c.theta[i] > 0.0) || (i > 0 && !(c.theta[i] > c.theta[i - 1]))) {
      throw ConfigError("config theta: must be positive and increasing");
    }
  }
  if (!(c.fit_t_lo > 0.0 && c.fit_t_hi > c.fit_t_lo)) {
    throw ConfigError("config fit_t_lo, fit_t_hi: need 0 < fit_t_lo < fit_t_hi");
  }
  if (c.fit_points < 5) throw ConfigError("config fit_points: must be >= 5");
  const EnvironmentSpec spec = c.environment.spec(0);
  const double t_init = std::max(c.integrator.t_init_factor * spec.time_floor(),
                                 c.integrator.min_init_time);
  const double t_lo = std::min(c.fit_t_lo, c.theta.front() * c.T);
  const double t_max = std::max(c.fit_t_hi, c.theta.back() * c.T);
  if (t_lo < t_init) {
    throw ConfigError("config: sampled times must be at least the tracer start " +
                      std::to_string(t_init));
  }
  if (t_max > spec.domain_length * spec.domain_length / 100.0) {
    throw ConfigError("config: sampled times must not exceed domain_length^2 / 100");
  }
  return c;
}

Json to_json(const ShortTimeConfig& c) {
  Json j = ensemble_json(c.ensemble);
  j["environment"] = environment_json(c.environment);
  j["T"] = c.T;
  j["theta"] = c.theta;
  j["fit_t_lo"] = c.fit_t_lo;
  j["fit_t_hi"] = c.fit_t_hi;
  j["fit_points"] = c.fit_points;
  j["integrator"] = integrator_json(c.integrator);
  return j;
}

LongTimeConfig parse_long_time(const Json& j) {
  LongTimeConfig c;
  Reader r(j, "");
  read_ensemble(r, c.ensemble);
  read_environment(r, c.environment);
  r.read_numbers("T", c.T);
  r.read("theta_lo", c.theta_lo);
  r.read("theta_hi", c.theta_hi);
  r.read("delta", c.delta);
  r.read("jump_t_min", c.jump_t_min);
  r.read_numbers("continuity_times", c.continuity_times);
  r.read("gap_grid", c.gap_grid);
  r.read("t_min_factor", c.t_min_factor);
  r.read("reference_n_env", c.reference_n_env);
  r.read("reference_offset", c.reference_offset);
  read_integrator(r, c.integrator);
  r.finish();
  if (c.T.empty()) throw ConfigError("config T: must not be empty");
  for (double t : c.T) {
    if (!(t > 0.0)) throw ConfigError("config T: entries must be positive");
  }
  if (!(c.theta_lo > 0.0 && c.theta_hi > c.theta_lo && c.theta_hi <= 1.0)) {
    throw ConfigError("config theta_lo, theta_hi: need 0 < theta_lo < theta_hi <= 1");
  }
  if (!(c.delta > 0.0 && c.delta < 0.5)) throw ConfigError("config delta: must lie in (0, 0.5)");
  if (!(c.jump_t_min > 0.0 && c.jump_t_min < 1.0)) {
    throw ConfigError("config jump_t_min: must lie in (0, 1)");
  }
  for (double t : c.continuity_times) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("config continuity_times: must lie in (0, 1]");
  }
  if (c.gap_grid < 2) throw ConfigError("config gap_grid: must be >= 2");
  if (!(c.t_min_factor >= 1.0)) throw ConfigError("config t_min_factor: must be >= 1");
  if (c.reference_n_env == 0) throw ConfigError("config reference_n_env: must be positive");
  require_domain(c.environment, 1.0 + c.delta);
  return c;
}

Json to_json(const LongTimeConfig& c) {
  Json j = ensemble_json(c.ensemble);
  j["environment"] = environment_json(c.environment);
  j["T"] = c.T;
  j["theta_lo"] = c.theta_lo;
  j["theta_hi"] = c.theta_hi;
  j["delta"] = c.delta;
  j["jump_t_min"] = c.jump_t_min;
  j["continuity_times"] = c.continuity_times;
  j["gap_grid"] = c.gap_grid;
  j["t_min_factor"] = c.t_min_factor;
  j["reference_n_env"] = c.reference_n_env;
  j["reference_offset"] = c.reference_offset;
  j["integrator"] = integrator_json(c.integrator);
  return j;
}

ZerosConfig parse_zeros(const Json& j) {
  ZerosConfig c;
  Reader r(j, "");
  read_ensemble(r, c.ensemble);
  read_environment(r, c.environment);
  r.read("t_min_factor", c.t_min_factor);
  r.read("T", c.T);
  r.read("tail_min", c.tail_min);
  r.read("histogram_bins", c.histogram_bins);
  r.read("roundtrip_curves", c.roundtrip_curves);
  r.read("roundtrip_t", c.roundtrip_t);
  r.read("export_env", c.export_env);
  r.finish();
  if (!(c.t_min_factor >= 1.0)) throw ConfigError("config t_min_factor: must be >= 1");
  if (!(c.T > 1.0)) throw ConfigError("config T: must exceed 1");
  if (c.tail_min < 1) throw ConfigError("config tail_min: must be positive");
  if (c.histogram_bins < 1) throw ConfigError("config histogram_bins: must be positive");
  const double t_min = c.t_min_factor * c.environment.spec(0).time_floor();
  if (!(c.roundtrip_t > t_min && c.roundtrip_t <= c.T)) {
    throw ConfigError("config roundtrip_t: must lie in (t_min, T]");
  }
  if (t_min >= 1.0) throw ConfigError("config: tracking start must be below 1");
  if (c.export_env >= static_cast<long>(c.ensemble.n_env)) {
    throw ConfigError("config export_env: must be below n_env");
  }
  require_domain(c.environment, c.T);
  return c;
}

Json to_json(const ZerosConfig& c) {
  Json j = ensemble_json(c.ensemble);
  j["environment"] = environment_json(c.environment);
  j["t_min_factor"] = c.t_min_factor;
  j["T"] = c.T;
  j["tail_min"] = c.tail_min;
  j["histogram_bins"] = c.histogram_bins;
  j["roundtrip_curves"] = c.roundtrip_curves;
  j["roundtrip_t"] = c.roundtrip_t;
  j["export_env"] = c.export_env;
  return j;
}

RoughCrossoverConfig parse_rough_crossover(const Json& j) {
  RoughCrossoverConfig c;
  c.crossover.paths = {160, 400};
  Reader r(j, "");
  r.read_numbers("lambdas", c.lambdas);
  std::vector<double> paths(c.crossover.paths.begin(), c.crossover.paths.end());
  r.read_numbers("paths", paths);
  c.crossover.paths.clear();
  for (double p : paths) {
    if (!(p >= 1.0) || p != std::floor(p)) {
      throw ConfigError("config paths: entries must be positive integers");
    }
    c.crossover.paths.push_back(static_cast<std::size_t>(p));
  }
  r.read("base_seed", c.crossover.base_seed);
  r.read("workers", c.crossover.workers);
  r.read("t_max_factor", c.crossover.t_max_factor);
  r.read("t_min", c.crossover.t_min);
  r.read("points_per_decade", c.crossover.points_per_decade);
  r.read("min_decades", c.crossover.min_decades);
  r.read("spacing", c.crossover.spacing);
  {
    Reader p(r.child("path"), r.child_path("path"));
    SLambdaConfig& s = c.crossover.path;
    p.read("ell", s.ell);
    p.read("snapshot_interval", s.snapshot_interval);
    p.read("substeps", s.substeps);
    p.read("mode_threshold", s.mode_threshold);
    p.read("taylor_order", s.taylor_order);
    p.read("recenter_radius", s.recenter_radius);
    read_integrator(p, s.integrator);
    p.finish();
  }
  r.finish();
  c.crossover.validate(c.lambdas);
  return c;
}

Json to_json(const RoughCrossoverConfig& c) {
  const CrossoverConfig& x = c.crossover;
  Json j;
  j["lambdas"] = c.lambdas;
  j["paths"] = x.paths;
  j["base_seed"] = x.base_seed;
  j["workers"] = x.workers;
  j["t_max_factor"] = x.t_max_factor;
  j["t_min"] = x.t_min;
  j["points_per_decade"] = x.points_per_decade;
  j["min_decades"] = x.min_decades;
  j["spacing"] = x.spacing;
  j["path"] = {{"ell", x.path.ell},
               {"snapshot_interval", x.path.snapshot_interval},
               {"substeps", x.path.substeps},
               {"mode_threshold", x.path.mode_threshold},
               {"taylor_order", x.path.taylor_order},
               {"recenter_radius", x.path.recenter_radius},
               {"integrator", integrator_json(x.path.integrator)}};
  return j;
}

double short_time_variance() {
  return 4.0 * (std::numbers::sqrt2 - 1.0) / (3.0 * std::sqrt(std::numbers::pi));
}

namespace {

EnsembleOptions options(const EnsembleSettings& e) {
  EnsembleOptions o;
  o.n_env = e.n_env;
  o.base_seed = e.base_seed;
  o.workers = e.workers;
  return o;
}

const char* pair_name(PairOrder p) {
  switch (p) {
    case PairOrder::kUU: return "u";
    case PairOrder::kDxuDxu: return "dxu";
    case PairOrder::kDtuDtu: return "dtu";
  }
  return "?";
}

int pair_derivative(PairOrder p) { return p == PairOrder::kUU ? 0 : 1; }

}  // namespace

ExperimentOutput run_sample_env(const SampleEnvConfig& c) {
  const std::vector<PairOrder> orders{PairOrder::kUU, PairOrder::kDxuDxu};
  const auto outcome = run_ensemble(options(c.ensemble), [&](std::size_t, std::uint64_t seed) {
    const Environment env = sample_environment(c.environment.spec(seed));
    std::vector<double> products;
    for (PairOrder order : orders) {
      const int d = pair_derivative(order);
      for (const ProbePair& p : c.probes) {
        products.push_back(env.eval_u(p.a.t, p.a.x, d) * env.eval_u(p.b.t, p.b.x, d));
      }
    }
    return products;
  });
  const auto samples = outcome.successes();

  ExperimentOutput out;
  CsvTable cov{"covariance.csv",
               {"pair", "t_a", "x_a", "t_b", "x_b", "empirical", "se", "oracle", "z"},
               {}};
  Json probes = Json::array();
  double max_z = 0.0;
  const Periodization per{c.environment.domain_length,
                          c.environment.zero_mode == ZeroMode::kExcluded};
  std::size_t col = 0;
  for (PairOrder order : orders) {
    for (const ProbePair& p : c.probes) {
      const MeanEstimate e = mean_estimate(column(samples, col++));
      const double oracle = covariance({p.a, p.b, order}, per);
      const double z = e.se > 0.0 ? (e.mean - oracle) / e.se : 0.0;
      max_z = std::max(max_z, std::abs(z));
      probes.push_back({{"pair", pair_name(order)},
                        {"a", {p.a.t, p.a.x}},
                        {"b", {p.b.t, p.b.x}},
                        {"empirical", e.mean},
                        {"se", e.se},
                        {"oracle", oracle},
                        {"z", z}});
      cov.add_row({pair_name(order), csv_number(p.a.t), csv_number(p.a.x), csv_number(p.b.t),
                   csv_number(p.b.x), csv_number(e.mean), csv_number(e.se),
                   csv_number(oracle), csv_number(z)});
    }
  }
  out.report = {{"experiment", "sample-env"},
                {"n_env", c.ensemble.n_env},
                {"successes", samples.size()},
                {"failures", failures_json(outcome.failures, c.ensemble.base_seed)},
                {"probes", probes},
                {"max_abs_z", max_z}};

  const Environment env = sample_environment(c.environment.spec(c.ensemble.base_seed));
  CsvTable snap{"snapshot.csv", {"x", "u", "ux", "uxx"}, {}};
  const double lambda = c.environment.domain_length;
  std::vector<double> xs(c.snapshot_points);
  for (int i = 0; i < c.snapshot_points; ++i) xs[i] = -0.5 * lambda + lambda * i / c.snapshot_points;
  const auto jets = env.jets(c.snapshot_time, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    snap.add_row({csv_number(xs[i]), csv_number(jets[i].u), csv_number(jets[i].ux),
                  csv_number(jets[i].uxx)});
  }
  out.tables.push_back(std::move(snap));
  out.tables.push_back(std::move(cov));
  return out;
}

ExperimentOutput run_short_time(const ShortTimeConfig& c) {
  std::vector<double> fit_times(c.fit_points);
  for (int i = 0; i < c.fit_points; ++i) {
    fit_times[i] = c.fit_t_lo * std::pow(c.fit_t_hi / c.fit_t_lo,
                                         static_cast<double>(i) / (c.fit_points - 1));
  }
  const std::size_t nt = c.theta.size();
  const double t_end = std::max(c.fit_t_hi, c.theta.back() * c.T);
  const double scale = std::pow(c.T, 0.75);

  // Per environment: X_{θT} / T^{3/4}, then the functional, then X at fit times.
  const auto outcome = run_ensemble(options(c.ensemble), [&](std::size_t, std::uint64_t seed) {
    const Environment env = sample_environment(c.environment.spec(seed));
    const TracerResult run = run_tracer(env, t_end, c.integrator);
    if (!run.ok()) throw TraceError(*run.error);
    std::vector<double> row;
    for (double th : c.theta) row.push_back(run.path.at(th * c.T) / scale);
    const ShortTimeFunctional f = short_time_functional(env, c.theta, c.T);
    row.insert(row.end(), f.values.begin(), f.values.end());
    for (double t : fit_times) row.push_back(run.path.at(t));
    return row;
  });
  const auto samples = outcome.successes();
  const double sigma2 = short_time_variance();

  ExperimentOutput out;
  Json per_theta = Json::array();
  CsvTable sample_table{"samples.csv", {"env"}, {}};
  for (double th : c.theta) sample_table.columns.push_back("x_scaled_theta_" + csv_number(th));
  for (double th : c.theta) sample_table.columns.push_back("functional_theta_" + csv_number(th));
  for (std::size_t i = 0; i < nt; ++i) {
    const double var = sigma2 * std::pow(c.theta[i], 1.5);
    auto cdf = [var](double x) { return normal_cdf(x, var); };
    Json entry = {{"theta", c.theta[i]}, {"expected_variance", var}};
    for (int k = 0; k < 2; ++k) {
      const auto col = column(samples, k * nt + i);
      const MeanEstimate m2 = second_moment(col);
      Json stat = ks_json(ks_one_sample(col, cdf));
      stat["mean"] = mean_estimate(col).mean;
      stat["second_moment"] = m2.mean;
      stat["second_moment_se"] = m2.se;
      entry[k == 0 ? "tracer" : "functional"] = stat;
    }
    per_theta.push_back(entry);
  }
  std::size_t env_index = 0;
  for (std::size_t i = 0; i < outcome.results.size(); ++i) {
    if (!outcome.results[i]) continue;
    std::vector<std::string> row{std::to_string(i)};
    for (std::size_t k = 0; k < 2 * nt; ++k) row.push_back(csv_number(samples[env_index][k]));
    sample_table.add_row(std::move(row));
    ++env_index;
  }

  CsvTable moments{"moments.csv", {"t", "second_moment", "se"}, {}};
  std::vector<double> m, w;
  Json moment_json = Json::array();
  for (int i = 0; i < c.fit_points; ++i) {
    const MeanEstimate e = second_moment(column(samples, 2 * nt + i));
    m.push_back(e.mean);
    w.push_back(e.se > 0.0 ? (e.mean / e.se) * (e.mean / e.se) : 1.0);
    moments.add_row({csv_number(fit_times[i]), csv_number(e.mean), csv_number(e.se)});
    moment_json.push_back({{"t", fit_times[i]}, {"second_moment", e.mean}, {"se", e.se}});
  }
  Json fit;
  try {
    fit = fit_json(fit_exponent(fit_times, m, w));
  } catch (const FitError& e) {
    fit = {{"skipped", e.what()}};
  }
  out.report = {{"experiment", "short-time"},
                {"T", c.T},
                {"variance_oracle", sigma2},
                {"n_env", c.ensemble.n_env},
                {"successes", samples.size()},
                {"failures", failures_json(outcome.failures, c.ensemble.base_seed)},
                {"theta", per_theta},
                {"moments", moment_json},
                {"fit", fit}};
  out.tables.push_back(std::move(moments));
  out.tables.push_back(std::move(sample_table));
  return out;
}

namespace {

Interval torus(const EnvironmentConfig& e) {
  return {-0.5 * e.domain_length, 0.5 * e.domain_length};
}

double z_at(const TrackResult& track, double t) {
  for (const FrontierRecord& r : track.frontier_history) {
    if (std::abs(r.frontier.t - t) <= 1e-12 * std::max(1.0, t)) {
      if (!r.valid || r.alternative_violated) {
        throw FrontierError("no valid frontier at t = " + std::to_string(t));
      }
      return r.frontier.Z;
    }
  }
  throw FrontierError("no frontier record at t = " + std::to_string(t));
}

CadlagPath tracer_cadlag(const TracerPath& p) {
  CadlagPath out;
  if (p.front_time() > 0.0) out.push(0.0, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (out.empty() || p.times()[i] > out.end()) out.push(p.times()[i], p.positions()[i]);
  }
  return out;
}

struct LongTimeEnv {
  double z1 = 0.0;
  std::vector<double> y1;
  std::vector<double> gap;
  std::vector<double> jump_times;
  std::vector<std::vector<double>> ws;  // [T][jump]
  std::vector<std::vector<double>> v;   // [T][continuity time]
};

}  // namespace

ExperimentOutput run_long_time(const LongTimeConfig& c) {
  const Interval interval = torus(c.environment);
  const double t_end = c.theta_hi + c.delta;
  auto track_env = [&](const Environment& env) {
    TrackConfig tc;
    tc.t_min = c.t_min_factor * env.time_floor();
    tc.t_max = c.theta_hi;
    tc.checkpoints = {c.theta_hi};
    return track_zero_curves(env, interval, tc);
  };

  const auto outcome = run_ensemble(options(c.ensemble), [&](std::size_t, std::uint64_t seed) {
    const Environment env = sample_environment(c.environment.spec(seed));
    const TrackResult track = track_env(env);
    const FrontierPaths fp = frontier_paths(track, 0.0, c.theta_hi);
    LongTimeEnv r;
    r.z1 = z_at(track, c.theta_hi);
    for (const ZJump& j : fp.z_jumps) {
      if (j.t >= c.jump_t_min && j.t <= c.theta_hi) r.jump_times.push_back(j.t);
    }
    std::vector<double> cont;
    for (double t : c.continuity_times) {
      const bool near_jump = std::any_of(fp.z_jumps.begin(), fp.z_jumps.end(), [&](const ZJump& j) {
        return std::abs(j.t - t) <= c.delta;
      });
      cont.push_back(near_jump ? std::nan("") : t);
    }
    for (double T : c.T) {
      const AmplifiedField field(env, std::pow(T, 0.25));
      const TracerResult run = run_tracer(field, t_end, c.integrator);
      if (!run.ok()) throw TraceError(*run.error);
      r.y1.push_back(run.path.at(c.theta_hi));
      double gap = 0.0;
      for (int i = 0; i < c.gap_grid; ++i) {
        const double th = c.theta_lo + (c.theta_hi - c.theta_lo) * i / (c.gap_grid - 1);
        gap = std::max(gap, std::abs(run.path.at(th) - fp.Z(th)));
      }
      for (const ZJump& j : fp.z_jumps) {
        if (j.t < c.theta_lo || j.t > c.theta_hi) continue;
        const double y = run.path.at(j.t);
        gap = std::max({gap, std::abs(y - j.left), std::abs(y - j.right)});
      }
      r.gap.push_back(gap);
      const CadlagPath y = tracer_cadlag(run.path);
      std::vector<double> ws;
      for (double t : r.jump_times) ws.push_back(oscillation_ws(y, t, c.delta));
      r.ws.push_back(std::move(ws));
      std::vector<double> v;
      for (double t : cont) v.push_back(std::isnan(t) ? t : oscillation_v(y, fp.Z, t, c.delta));
      r.v.push_back(std::move(v));
    }
    return r;
  });

  EnsembleOptions ref_opt = options(c.ensemble);
  ref_opt.n_env = c.reference_n_env;
  ref_opt.base_seed = c.ensemble.base_seed + c.reference_offset;
  const auto reference = run_ensemble(ref_opt, [&](std::size_t, std::uint64_t seed) {
    const Environment env = sample_environment(c.environment.spec(seed));
    return z_at(track_env(env), c.theta_hi);
  });
  const auto z_ref = reference.successes();
  const auto envs = outcome.successes();

  ExperimentOutput out;
  CsvTable table{"long_time.csv", {"env", "T", "y1", "gap", "z1"}, {}};
  CsvTable jumps{"jumps.csv", {"env", "t_jump", "T", "ws"}, {}};
  std::size_t k = 0;
  for (std::size_t i = 0; i < outcome.results.size(); ++i) {
    if (!outcome.results[i]) continue;
    const LongTimeEnv& r = envs[k++];
    for (std::size_t a = 0; a < c.T.size(); ++a) {
      table.add_row({std::to_string(i), csv_number(c.T[a]), csv_number(r.y1[a]),
                     csv_number(r.gap[a]), csv_number(r.z1)});
      for (std::size_t b = 0; b < r.jump_times.size(); ++b) {
        jumps.add_row({std::to_string(i), csv_number(r.jump_times[b]), csv_number(c.T[a]),
                       csv_number(r.ws[a][b])});
      }
    }
  }
  Json per_T = Json::array();
  std::vector<double> gap_median, ws_median;
  for (std::size_t a = 0; a < c.T.size(); ++a) {
    std::vector<double> y1, gap, ws, v;
    for (const LongTimeEnv& r : envs) {
      y1.push_back(r.y1[a]);
      gap.push_back(r.gap[a]);
      ws.insert(ws.end(), r.ws[a].begin(), r.ws[a].end());
      for (double x : r.v[a]) {
        if (!std::isnan(x)) v.push_back(x);
      }
    }
    gap_median.push_back(median(gap));
    ws_median.push_back(median(ws));
    per_T.push_back({{"T", c.T[a]},
                     {"ks_vs_reference_z1", ks_json(ks_two_sample(y1, z_ref))},
                     {"second_moment_y1", second_moment(y1).mean},
                     {"median_gap", gap_median.back()},
                     {"jumps", ws.size()},
                     {"median_ws", ws_median.back()},
                     {"continuity_samples", v.size()},
                     {"median_v", median(v)}});
  }
  std::vector<double> z1;
  std::vector<double> jump_ratio;
  for (const LongTimeEnv& r : envs) {
    z1.push_back(r.z1);
    if (c.T.size() >= 2) {
      for (std::size_t b = 0; b < r.jump_times.size(); ++b) {
        if (r.ws[0][b] > 0.0) jump_ratio.push_back(r.ws.back()[b] / r.ws[0][b]);
      }
    }
  }
  out.report = {{"experiment", "long-time"},
                {"n_env", c.ensemble.n_env},
                {"successes", envs.size()},
                {"failures", failures_json(outcome.failures, c.ensemble.base_seed)},
                {"reference",
                 {{"n_env", c.reference_n_env},
                  {"base_seed", ref_opt.base_seed},
                  {"successes", z_ref.size()},
                  {"failures", failures_json(reference.failures, ref_opt.base_seed)},
                  {"ks_z1_vs_reference", ks_json(ks_two_sample(z1, z_ref))},
                  {"second_moment_z1", second_moment(z_ref).mean}}},
                {"per_T", per_T}};
  if (c.T.size() >= 2) {
    out.report["gap_ratio"] = gap_median.back() / gap_median.front();
    out.report["ws_ratio"] = ws_median.back() / ws_median.front();
    out.report["ws_median_pair_ratio"] = median(jump_ratio);
  }
  out.tables.push_back(std::move(table));
  out.tables.push_back(std::move(jumps));
  return out;
}

RoundTrip zero_roundtrip(const VelocityField& field, Interval interval, double t,
                         double s_target, std::uint64_t seed) {
  const ZeroTolerances tol = zero_tolerances(field, t, interval);
  const auto zeros = find_zeros(field, t, interval, scan_points(t, interval), tol);
  std::vector<ZeroPoint> regular;
  for (const ZeroPoint& z : zeros) {
    if (z.kind != ZeroKind::kNeutral) regular.push_back(z);
  }
  if (regular.empty()) throw TraceError("roundtrip: no regular zero at t");
  const ZeroPoint z = regular[derive_seed(seed, 0x5eed) % regular.size()];
  TraceConfig tc;
  tc.tol = tol;
  const TraceResult back = trace_zero(field, z, s_target, tc);
  if (!back.ok()) throw TraceError(*back.error);
  const double s0 = back.curve.times.front();
  const double x0 = back.curve.positions.front();
  const IntegratorConfig ic;
  const auto rhs = [&field](double s, double x) {
    const FieldJet j = field.jet(s, x);
    return -j.uxx / j.ux;
  };
  const TracerResult fwd = integrate_ode(rhs, x0, s0, t, ic);
  if (!fwd.ok()) throw TraceError("roundtrip: " + *fwd.error);
  RoundTrip r;
  r.start = z.x;
  r.end = fwd.path.back_position();
  r.residual = std::abs(field.value(t, r.end));
  r.zero_tol = tol.zero_tol;
  return r;
}

namespace {

struct ZerosEnv {
  double z1 = 0.0;
  double zT = 0.0;
  long queries = 0;
  long violations = 0;
  long invalid = 0;
  int lap_violations = 0;
  std::size_t jumps = 0;
  std::size_t matched = 0;
  std::size_t events = 0;
  std::size_t bad_events = 0;
  std::optional<RoundTrip> roundtrip;
};

TrackConfig zeros_track_config(const ZerosConfig& c, const VelocityField& env) {
  TrackConfig tc;
  tc.t_min = c.t_min_factor * env.time_floor();
  tc.t_max = c.T;
  tc.checkpoints = {c.roundtrip_t, 1.0, c.T};
  std::sort(tc.checkpoints.begin(), tc.checkpoints.end());
  tc.checkpoints.erase(std::unique(tc.checkpoints.begin(), tc.checkpoints.end()),
                       tc.checkpoints.end());
  return tc;
}

}  // namespace

ExperimentOutput run_zeros(const ZerosConfig& c) {
  const Interval interval = torus(c.environment);
  const auto outcome = run_ensemble(options(c.ensemble), [&](std::size_t i, std::uint64_t seed) {
    const Environment env = sample_environment(c.environment.spec(seed));
    const TrackConfig tc = zeros_track_config(c, env);
    const TrackResult track = track_zero_curves(env, interval, tc);
    ZerosEnv r;
    r.z1 = z_at(track, 1.0);
    r.zT = z_at(track, c.T);
    r.queries = track.frontier_queries;
    r.violations = track.frontier_violations;
    r.invalid = track.frontier_invalid;
    r.lap_violations = track.lap_violations;
    r.events = track.events.size();
    for (const AnnihilationEvent& e : track.events) {
      const auto& s = track.curves[static_cast<std::size_t>(e.stable_id)];
      const auto& u = track.curves[static_cast<std::size_t>(e.unstable_id)];
      if (s.kind != ZeroKind::kStable || u.kind != ZeroKind::kUnstable) ++r.bad_events;
    }
    const FrontierPaths fp = frontier_paths(track, tc.t_min, c.T);
    r.jumps = fp.z_jumps.size();
    for (const ZJump& j : fp.z_jumps) {
      const double tol = merge_tolerance(j.t - j.prev_t);
      const bool hit = std::any_of(track.events.begin(), track.events.end(), [&](const auto& e) {
        return e.stable_id == j.old_id && e.t > j.prev_t && e.t <= j.t * (1.0 + 1e-12) &&
               std::abs(e.x - j.left) <= tol;
      });
      if (hit) ++r.matched;
    }
    if (i < c.roundtrip_curves) {
      r.roundtrip = zero_roundtrip(env, interval, c.roundtrip_t, tc.t_min, seed);
    }
    return r;
  });
  const auto envs = outcome.successes();

  ExperimentOutput out;
  long queries = 0, violations = 0, invalid = 0, laps = 0;
  std::size_t jumps = 0, matched = 0, events = 0, bad_events = 0;
  std::vector<double> z1_all, z1_even, zT_odd, abs_z1;
  std::size_t rt_n = 0, rt_within = 0;
  double rt_max_pos = 0.0, rt_max_res = 0.0;
  CsvTable zs{"z_samples.csv", {"env", "z1", "zT"}, {}};
  CsvTable rts{"roundtrip.csv", {"env", "start", "end", "residual", "zero_tol"}, {}};
  std::size_t k = 0;
  for (std::size_t i = 0; i < outcome.results.size(); ++i) {
    if (!outcome.results[i]) continue;
    const ZerosEnv& r = envs[k++];
    queries += r.queries;
    violations += r.violations;
    invalid += r.invalid;
    laps += r.lap_violations;
    jumps += r.jumps;
    matched += r.matched;
    events += r.events;
    bad_events += r.bad_events;
    z1_all.push_back(r.z1);
    abs_z1.push_back(std::abs(r.z1));
    if (i % 2 == 0) {
      z1_even.push_back(r.z1);
    } else {
      zT_odd.push_back(r.zT / std::sqrt(c.T));
    }
    zs.add_row({std::to_string(i), csv_number(r.z1), csv_number(r.zT)});
    if (r.roundtrip) {
      const RoundTrip& t = *r.roundtrip;
      ++rt_n;
      const double pos = std::abs(t.end - t.start) / t.zero_tol;
      rt_max_pos = std::max(rt_max_pos, pos);
      rt_max_res = std::max(rt_max_res, t.residual / t.zero_tol);
      if (pos <= 1e3) ++rt_within;
      rts.add_row({std::to_string(i), csv_number(t.start), csv_number(t.end),
                   csv_number(t.residual), csv_number(t.zero_tol)});
    }
  }
  Json scaling;
  if (z1_even.size() >= 2 && zT_odd.size() >= 2) {
    scaling = ks_json(ks_two_sample(zT_odd, z1_even));
    scaling["n_scaled"] = zT_odd.size();
    scaling["n_reference"] = z1_even.size();
  }
  Json tail;
  try {
    const double z_hi = tail_limit(abs_z1, c.tail_min);
    const TailFit f = tail_fit(abs_z1, 0.0, z_hi, 50, c.tail_min);
    tail = {{"z_lo", f.z_lo}, {"z_hi", f.z_hi}, {"rate", f.rate},
            {"intercept", f.intercept}, {"r2", f.r2}, {"tail_count", f.tail_count}};
  } catch (const FitError& e) {
    tail = {{"skipped", e.what()}};
  }
  Json density;
  if (!z1_all.empty()) {
    const Histogram h = density_histogram(z1_all, c.histogram_bins);
    density = {{"bins", c.histogram_bins},
               {"lo", h.lo},
               {"hi", h.hi},
               {"max_height", h.max_height},
               {"max_height_doubled", h.max_height_doubled},
               {"doubling_ratio", h.doubling_ratio}};
  }
  out.report = {
      {"experiment", "zeros"},
      {"n_env", c.ensemble.n_env},
      {"successes", envs.size()},
      {"failures", failures_json(outcome.failures, c.ensemble.base_seed)},
      {"frontier",
       {{"queries", queries},
        {"alternative_violations", violations},
        {"invalid", invalid},
        {"violation_rate", queries ? static_cast<double>(violations) / queries : 0.0}}},
      {"z_jumps", {{"total", jumps}, {"matched_annihilations", matched}}},
      {"events", {{"total", events}, {"kind_mismatches", bad_events}}},
      {"lap_violations", laps},
      {"scaling", {{"T", c.T}, {"ks", scaling}}},
      {"tail", tail},
      {"density", density},
      {"second_moment_z1", second_moment(z1_all).mean},
      {"roundtrip",
       {{"curves", rt_n},
        {"within_tolerance", rt_within},
        {"max_position_over_zero_tol", rt_max_pos},
        {"max_residual_over_zero_tol", rt_max_res}}}};
  out.tables.push_back(std::move(zs));
  out.tables.push_back(std::move(rts));

  if (c.export_env >= 0) {
    const std::uint64_t seed = c.ensemble.base_seed + static_cast<std::uint64_t>(c.export_env);
    const Environment env = sample_environment(c.environment.spec(seed));
    const TrackResult track = track_zero_curves(env, interval, zeros_track_config(c, env));
    CsvTable curves{"curves.csv", {"curve_id", "t", "x", "kind", "origin_sign"}, {}};
    for (const ZeroCurve& cv : track.curves) {
      for (std::size_t s = 0; s < cv.times.size(); ++s) {
        curves.add_row({std::to_string(cv.id), csv_number(cv.times[s]), csv_number(cv.positions[s]),
                        to_string(cv.kind), std::to_string(cv.origin_sign)});
      }
    }
    CsvTable ev{"events.csv", {"t", "x", "curve_id_stable", "curve_id_unstable"}, {}};
    for (const AnnihilationEvent& e : track.events) {
      ev.add_row({csv_number(e.t), csv_number(e.x), std::to_string(e.stable_id),
                  std::to_string(e.unstable_id)});
    }
    out.tables.push_back(std::move(curves));
    out.tables.push_back(std::move(ev));
  }
  return out;
}

ExperimentOutput run_rough_crossover(const RoughCrossoverConfig& c) {
  const CrossoverReport rep = crossover_report(c.lambdas, c.crossover);
  const double d_oracle = 4.0 / (3.0 * std::sqrt(std::numbers::pi));
  ExperimentOutput out;
  Json per = Json::array();
  for (const LambdaCrossover& l : rep.per_lambda) {
    auto window = [](const WindowFit& w) {
      Json j = {{"t_lo", w.t_lo}, {"t_hi", w.t_hi}};
      if (w.fit) {
        merge(j, fit_json(*w.fit));
      } else {
        j["skipped"] = w.skipped;
      }
      return j;
    };
    CsvTable t{"moments_lambda_" + csv_number(l.lambda) + ".csv",
               {"t", "second_moment", "se", "subdiffusive_ratio", "diffusive_ratio"},
               {}};
    Json moments = Json::array();
    for (std::size_t i = 0; i < l.times.size(); ++i) {
      const MeanEstimate& e = l.second_moment[i];
      const double sub = e.mean / (l.lambda * l.lambda * std::pow(l.times[i], 1.5));
      t.add_row({csv_number(l.times[i]), csv_number(e.mean), csv_number(e.se), csv_number(sub),
                 csv_number(e.mean / l.times[i])});
      moments.push_back({{"t", l.times[i]}, {"second_moment", e.mean}, {"se", e.se}});
    }
    out.tables.push_back(std::move(t));
    Json j = {{"lambda", l.lambda},
              {"t_max", l.t_max},
              {"paths", l.paths},
              {"failures", failures_json(l.failures, c.crossover.base_seed)},
              {"sub_diffusive", window(l.sub_diffusive)},
              {"diffusive", window(l.diffusive)},
              {"d_oracle", d_oracle},
              {"d_estimate", l.d_estimate},
              {"d_estimate_se", l.d_estimate_se},
              {"d_estimate_time", l.d_estimate_time},
              {"d_free_form", l.d_free_form ? Json(*l.d_free_form) : Json()},
              {"kink_time", l.kink.t_kink},
              {"kink_over_lambda_scale", l.kink.t_kink * std::pow(l.lambda, 4.0)},
              {"diffusivity", {{"mean", l.diffusivity.mean}, {"se", l.diffusivity.se}}},
              {"moments", moments}};
    per.push_back(j);
  }
  out.report = {{"experiment", "rough-crossover"},
                {"per_lambda", per},
                {"collapse_z", rep.collapse_z}};
  return out;
}

}  // namespace heattracer
