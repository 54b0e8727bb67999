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

// Acceptance checks. Usage: acceptance <criterion 1-8>. Prints one line
// "criterion N: PASS|FAIL ..." and writes the underlying report to
// acceptance_<N>.json in the working directory.

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "heattracer/cadlag.hpp"
#include "heattracer/experiments.hpp"
#include "heattracer/stats.hpp"

using namespace heattracer;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (detail.tellp() > 0) detail << "; ";
    detail << what << (ok ? " ok" : " FAILED");
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void save(int n, const Json& report) {
  std::ofstream("acceptance_" + std::to_string(n) + ".json") << report.dump(2) << "\n";
}

const CsvTable& table(const ExperimentOutput& out, const std::string& name) {
  for (const CsvTable& t : out.tables) {
    if (t.name == name) return t;
  }
  throw std::runtime_error("missing table " + name);
}

std::vector<double> column(const CsvTable& t, const std::string& name) {
  std::size_t idx = t.columns.size();
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (t.columns[i] == name) idx = i;
  }
  if (idx == t.columns.size()) throw std::runtime_error("missing column " + name);
  std::vector<double> v;
  for (const auto& row : t.rows) v.push_back(std::stod(row[idx]));
  return v;
}

// Periodized heat kernel and its second derivative by image sums.
double periodized(double t, double x, double period, int order) {
  double sum = 0.0;
  for (int n = -40; n <= 40; ++n) {
    const double y = x + n * period;
    const double g = std::exp(-y * y / (4.0 * t)) / std::sqrt(4.0 * kPi * t);
    sum += order == 0 ? g : g * (y * y / (4.0 * t * t) - 1.0 / (2.0 * t));
  }
  return sum;
}

Verdict criterion1() {
  SampleEnvConfig c;
  const ExperimentOutput out = run_sample_env(c);
  save(1, out.report);
  Verdict v;
  double worst = 0.0;
  for (const Json& p : out.report["probes"]) {
    const double t = p["a"][0].get<double>() + p["b"][0].get<double>();
    const double dx = p["a"][1].get<double>() - p["b"][1].get<double>();
    const bool deriv = p["pair"] == "dxu";
    const double oracle = deriv ? -periodized(t, dx, c.environment.domain_length, 2)
                                : periodized(t, dx, c.environment.domain_length, 0);
    const double z = (p["empirical"].get<double>() - oracle) / p["se"].get<double>();
    worst = std::max(worst, std::abs(z));
  }
  v.check(out.report["probes"].size() == 12, "12 probe entries");
  v.check(worst <= 4.0, "max |z| = " + fmt(worst) + " <= 4");
  return v;
}

Verdict criterion2() {
  ShortTimeConfig c;
  const ExperimentOutput out = run_short_time(c);
  save(2, out.report);
  boost::math::quadrature::tanh_sinh<double> q;
  const double sigma2 = q.integrate(
      [&](double s) {
        return q.integrate([s](double r) { return 1.0 / std::sqrt(4.0 * kPi * (s + r)); }, 0.0, 1.0);
      },
      0.0, 1.0);
  Verdict v;
  v.check(std::abs(sigma2 - 4.0 * (std::sqrt(2.0) - 1.0) / (3.0 * std::sqrt(kPi))) < 1e-8,
          "sigma^2 quadrature " + fmt(sigma2));
  const std::vector<double> x = column(table(out, "samples.csv"), "x_scaled_theta_1");
  const KsResult ks = ks_one_sample(x, [sigma2](double y) { return normal_cdf(y, sigma2); });
  v.check(x.size() == c.ensemble.n_env, std::to_string(x.size()) + " samples");
  v.check(ks.p_value >= 0.01, "KS p = " + fmt(ks.p_value));
  const double slope = out.report["fit"]["slope"].get<double>();
  v.check(std::abs(slope - 1.5) <= 0.1, "slope " + fmt(slope) + " in 1.5 +- 0.1");
  return v;
}

Verdict criterion3() {
  LongTimeConfig c;
  const ExperimentOutput out = run_long_time(c);
  save(3, out.report);
  Verdict v;
  const Json& per_t = out.report["per_T"];
  const double p = per_t[0]["ks_vs_reference_z1"]["p_value"].get<double>();
  v.check(per_t[0]["T"].get<double>() == 1e3 && p >= 0.01, "(a) KS at T=1e3 p = " + fmt(p));
  const double g0 = per_t[0]["median_gap"].get<double>(), g1 = per_t[1]["median_gap"].get<double>();
  v.check(g1 <= 0.8 * g0, "(b) median gap " + fmt(g0) + " -> " + fmt(g1) + ", ratio " + fmt(g1 / g0) + " <= 0.8");
  const double w0 = per_t[0]["median_ws"].get<double>(), w1 = per_t[1]["median_ws"].get<double>();
  std::string note = "(c) median w_s " + fmt(w0) + " -> " + fmt(w1) + " <= 0.8x";
  if (w0 == 0.0 && w1 == 0.0) note += " (degenerate: both medians are 0)";
  v.check(w1 <= 0.8 * w0, note);
  return v;
}

Verdict criterion4() {
  ZerosConfig c;
  c.roundtrip_curves = 0;
  c.export_env = -1;
  const ExperimentOutput out = run_zeros(c);
  save(4, out.report);
  const Json& r = out.report;
  Verdict v;
  const double rate = r["frontier"]["violation_rate"].get<double>();
  v.check(rate < 0.01, "(a) alternative violation rate " + fmt(rate) + " < 1%");
  const long total = r["z_jumps"]["total"].get<long>(), matched = r["z_jumps"]["matched_annihilations"].get<long>();
  v.check(total > 0 && matched == total, "(b) jumps matched " + std::to_string(matched) + "/" + std::to_string(total));
  const CsvTable& zs = table(out, "z_samples.csv");
  const std::vector<double> z1 = column(zs, "z1"), zt = column(zs, "zT");
  std::vector<double> scaled, reference;
  for (std::size_t i = 0; i < z1.size(); ++i) {
    if (i % 2 == 0) {
      reference.push_back(z1[i]);
    } else {
      scaled.push_back(zt[i] / std::sqrt(c.T));
    }
  }
  const KsResult ks = ks_two_sample(scaled, reference);
  v.check(ks.p_value >= 0.01, "(c) scaling KS p = " + fmt(ks.p_value));
  if (r["tail"].contains("r2")) {
    const double r2 = r["tail"]["r2"].get<double>();
    v.check(r2 >= 0.9, "(d) tail R^2 " + fmt(r2) + " (rate " + fmt(r["tail"]["rate"].get<double>()) + ")");
  } else {
    v.check(false, "(d) tail fit skipped");
  }
  const double ratio = r["density"]["doubling_ratio"].get<double>();
  v.check(ratio >= 0.7 && ratio <= 1.4, "(e) density doubling ratio " + fmt(ratio));
  return v;
}

Verdict criterion5() {
  ZerosConfig c;
  c.ensemble.n_env = 100;
  c.roundtrip_curves = 100;
  c.export_env = -1;
  const ExperimentOutput out = run_zeros(c);
  save(5, out.report);
  const Json& r = out.report;
  Verdict v;
  const CsvTable& rt = table(out, "roundtrip.csv");
  const std::vector<double> start = column(rt, "start"), end = column(rt, "end"), tol = column(rt, "zero_tol");
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < start.size(); ++i) {
    const double ratio = std::abs(end[i] - start[i]) / tol[i];
    worst = std::max(worst, ratio);
    ok += ratio <= 1e3;
  }
  v.check(start.size() == 100 && ok == 100,
          "round trips " + std::to_string(ok) + "/" + std::to_string(start.size()) + " within 1e3 zero_tol (max " +
              fmt(worst) + ")");
  v.check(r["lap_violations"].get<long>() == 0, "lap violations " + std::to_string(r["lap_violations"].get<long>()));
  v.check(r["events"]["kind_mismatches"].get<long>() == 0,
          "unpaired annihilations " + std::to_string(r["events"]["kind_mismatches"].get<long>()) + " of " +
              std::to_string(r["events"]["total"].get<long>()));
  return v;
}

Verdict criterion6() {
  Verdict v;
  auto constant = [](double c) {
    CadlagPath p;
    p.push(0.0, c);
    p.push(1.0, c);
    return p;
  };
  CadlagPath jump;
  jump.push(0.0, 0.0);
  jump.push_jump(0.5, 0.0, 1.0);
  jump.push(1.0, 1.0);
  const std::vector<double> t3{0.0, 0.5, 1.0}, v3{0.0, 2.0, 1.0}, mono{0.0, 1.0, 3.0};
  const CadlagPath overshoot = CadlagPath::from_samples(t3, v3);
  const CadlagPath monotone = CadlagPath::from_samples(t3, mono);
  CadlagPath shifted;
  shifted.push(0.0, 0.5);
  shifted.push_jump(0.5, 0.5, 1.5);
  shifted.push(1.0, 1.5);
  bool v_monotone = true;
  double prev = 0.0;
  for (double d : {0.0, 0.05, 0.1, 0.3, 1.0}) {
    const double x = oscillation_v(overshoot, jump, 0.4, d);
    v_monotone = v_monotone && x >= prev;
    prev = x;
  }
  const bool examples =
      segment_distance(2, 0, 1) == 1.0 && segment_distance(0.5, 0, 1) == 0.0 && segment_distance(-1, 0, 0) == 1.0 &&
      oscillation_v(constant(2.0), constant(2.0), 0.5, 0.2) == 0.0 &&
      oscillation_v(constant(0.0), jump, 0.5, 0.1) == 1.0 && v_monotone &&
      oscillation_ws(monotone, 0.5, 0.5) == 0.0 && oscillation_ws(overshoot, 0.5, 0.5) >= 1.0 &&
      oscillation_ws(jump, 0.5, 0.01) == 0.0 && oscillation_ws(jump, 0.5, 0.5) == 0.0 &&
      uniform_distance(jump, jump) == 0.0 && uniform_distance(jump, shifted) == 0.5 &&
      m1_upper_bound(jump, jump, 100) == 0.0 && m1_upper_bound(constant(0.0), constant(1.5), 100) == 1.5;
  v.check(examples, "exact examples");
  for (double h : {0.1, 0.01}) {
    CadlagPath ramp;
    ramp.push(0.0, 0.0);
    ramp.push(0.5 - h, 0.0);
    ramp.push(0.5 + h, 1.0);
    ramp.push(1.0, 1.0);
    const double b = m1_upper_bound(jump, ramp, 4000);
    v.check(b < 2.0 * h + 1e-6, "jump vs ramp h=" + fmt(h) + ": bound " + fmt(b));
  }
  Json report = {{"examples", examples}};
  save(6, report);
  return v;
}

Verdict criterion7() {
  RoughCrossoverConfig c;
  c.crossover.paths = {160, 400};
  c.crossover.base_seed = 1;
  const ExperimentOutput out = run_rough_crossover(c);
  save(7, out.report);
  Verdict v;
  const double d = 4.0 / (3.0 * std::sqrt(kPi));
  for (const Json& l : out.report["per_lambda"]) {
    const std::string tag = "lambda " + fmt(l["lambda"].get<double>());
    for (const char* window : {"sub_diffusive", "diffusive"}) {
      const Json& w = l[window];
      const double target = std::string(window) == "sub_diffusive" ? 1.5 : 1.0;
      if (!w.contains("slope")) {
        v.check(false, tag + " " + window + " fit skipped");
        continue;
      }
      const double s = w["slope"].get<double>();
      v.check(std::abs(s - target) <= 0.15, tag + " " + window + " slope " + fmt(s) + " in " + fmt(target) + " +- 0.15");
    }
    const double est = l["d_estimate"].get<double>();
    v.check(std::abs(est - d) <= 0.15 * d, tag + " D " + fmt(est) + " within 15% of " + fmt(d));
  }
  return v;
}

// Same report and tables for workers 1 and 3.
bool same_outputs(const std::function<ExperimentOutput(int)>& run) {
  const ExperimentOutput a = run(1);
  const ExperimentOutput b = run(3);
  if (a.report.dump() != b.report.dump() || a.tables.size() != b.tables.size()) return false;
  for (std::size_t i = 0; i < a.tables.size(); ++i) {
    if (a.tables[i].str() != b.tables[i].str()) return false;
  }
  return true;
}

Verdict criterion8() {
  Verdict v;
  v.check(same_outputs([](int w) {
            SampleEnvConfig c;
            c.ensemble = {50, 3, w};
            return run_sample_env(c);
          }),
          "sample-env");
  v.check(same_outputs([](int w) {
            ShortTimeConfig c;
            c.ensemble = {50, 3, w};
            return run_short_time(c);
          }),
          "short-time");
  v.check(same_outputs([](int w) {
            LongTimeConfig c;
            c.ensemble = {6, 3, w};
            c.reference_n_env = 6;
            c.T = {100.0, 400.0};
            return run_long_time(c);
          }),
          "long-time");
  v.check(same_outputs([](int w) {
            ZerosConfig c;
            c.ensemble = {20, 3, w};
            c.roundtrip_curves = 5;
            return run_zeros(c);
          }),
          "zeros");
  v.check(same_outputs([](int w) {
            RoughCrossoverConfig c;
            c.lambdas = {0.5};
            c.crossover.paths = {12};
            c.crossover.base_seed = 3;
            c.crossover.workers = w;
            return run_rough_crossover(c);
          }),
          "rough-crossover");
  save(8, Json{{"identical", v.pass}});
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 0;
  const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8};
  if (n < 1 || n > 8) {
    std::fprintf(stderr, "usage: acceptance <criterion 1-8>\n");
    return 2;
  }
  try {
    const Verdict v = criteria[n - 1]();
    std::printf("criterion %d: %s (%s)\n", n, v.pass ? "PASS" : "FAIL", v.detail.str().c_str());
    return v.pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::printf("criterion %d: FAIL (error: %s)\n", n, e.what());
    return 1;
  }
}
