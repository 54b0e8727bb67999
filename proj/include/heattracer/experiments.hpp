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

#include <cstdint>
#include <string>
#include <vector>

#include "heattracer/environment.hpp"
#include "heattracer/rough_env.hpp"
#include "heattracer/tracer.hpp"
#include "heattracer/zeros.hpp"
#include "json.hpp"

namespace heattracer {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kCsvFormat = 1;

struct CsvTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  std::string str() const;
};

std::string csv_number(double v);

struct ExperimentOutput {
  Json report;
  std::vector<CsvTable> tables;
};

struct EnsembleSettings {
  std::size_t n_env = 1;
  std::uint64_t base_seed = 1;
  int workers = 1;
};

struct EnvironmentConfig {
  double domain_length = 50.0;
  int mode_count = 256;
  ZeroMode zero_mode = ZeroMode::kIncluded;

  EnvironmentSpec spec(std::uint64_t seed) const;
};

struct ProbePair {
  SpaceTimePoint a;
  SpaceTimePoint b;
};

struct SampleEnvConfig {
  EnsembleSettings ensemble{10000, 1, 1};
  EnvironmentConfig environment{50.0, 256};
  std::vector<ProbePair> probes{{{1.0, 0.0}, {1.0, 0.0}},   {{1.0, 0.0}, {1.0, 1.0}},
                                {{0.5, 0.0}, {2.0, 1.5}},   {{0.25, 0.0}, {0.25, 0.5}},
                                {{1.0, 0.0}, {3.0, -2.0}},  {{2.0, 5.0}, {0.5, 4.0}}};
  double snapshot_time = 1.0;
  int snapshot_points = 512;
};

struct ShortTimeConfig {
  EnsembleSettings ensemble{2000, 1, 1};
  EnvironmentConfig environment{2.0, 1024};
  double T = 1e-3;
  std::vector<double> theta{0.25, 0.5, 1.0};
  double fit_t_lo = 1e-4;
  double fit_t_hi = 1e-2;
  int fit_points = 9;
  IntegratorConfig integrator;
};

struct LongTimeConfig {
  EnsembleSettings ensemble{500, 1, 1};
  EnvironmentConfig environment{64.0, 4096};
  std::vector<double> T{1e3, 4e3};
  double theta_lo = 0.5;
  double theta_hi = 1.0;
  double delta = 0.05;
  /// Z jumps before this rescaled time are not sampled.
  double jump_t_min = 0.1;
  std::vector<double> continuity_times{0.6, 0.7, 0.8, 0.9};
  int gap_grid = 2001;
  double t_min_factor = 10.0;
  /// Independent Z_1 sample: seeds base_seed + reference_offset + i.
  std::size_t reference_n_env = 500;
  std::uint64_t reference_offset = 1'000'000'000;
  IntegratorConfig integrator;
};

struct ZerosConfig {
  EnsembleSettings ensemble{10000, 1, 1};
  EnvironmentConfig environment{128.0, 2048};
  double t_min_factor = 10.0;
  double T = 4.0;
  std::size_t tail_min = 100;
  int histogram_bins = 50;
  /// Environments 0 .. roundtrip_curves-1 each trace one random zero at
  /// roundtrip_t back to the tracking start and integrate it forward again.
  std::size_t roundtrip_curves = 100;
  double roundtrip_t = 1.0;
  /// Index of the environment whose curves and events are written; -1: none.
  long export_env = 0;
};

struct RoughCrossoverConfig {
  std::vector<double> lambdas{0.25, 0.5};
  CrossoverConfig crossover;
};

SampleEnvConfig parse_sample_env(const Json& j);
ShortTimeConfig parse_short_time(const Json& j);
LongTimeConfig parse_long_time(const Json& j);
ZerosConfig parse_zeros(const Json& j);
RoughCrossoverConfig parse_rough_crossover(const Json& j);

Json to_json(const SampleEnvConfig& c);
Json to_json(const ShortTimeConfig& c);
Json to_json(const LongTimeConfig& c);
Json to_json(const ZerosConfig& c);
Json to_json(const RoughCrossoverConfig& c);

/// Var of ∫_0^1 u(s, 0) ds in closed form, 4 (√2 - 1) / (3 √π).
double short_time_variance();

ExperimentOutput run_sample_env(const SampleEnvConfig& c);
ExperimentOutput run_short_time(const ShortTimeConfig& c);
ExperimentOutput run_long_time(const LongTimeConfig& c);
ExperimentOutput run_zeros(const ZerosConfig& c);
ExperimentOutput run_rough_crossover(const RoughCrossoverConfig& c);

struct RoundTrip {
  double start = 0.0;
  double end = 0.0;
  double residual = 0.0;  // |u(t, end)|
  double zero_tol = 0.0;
};

/// Traces a zero of u(t, ·) chosen by seed back to s_target and integrates
/// ∂s r = -∂xx u / ∂x u forward from the earliest traced sample to t.
RoundTrip zero_roundtrip(const VelocityField& field, Interval interval, double t,
                         double s_target, std::uint64_t seed);

}  // namespace heattracer
