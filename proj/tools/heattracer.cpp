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

// heattracer: runs one experiment per subcommand and writes
// manifest.json, report.json, run_info.json and CSV tables to --out.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "heattracer/errors.hpp"
#include "heattracer/experiments.hpp"

namespace fs = std::filesystem;
using heattracer::Json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kManifestFormat = 1;

void log(const std::string& msg) { std::cerr << "[heattracer] " << msg << std::endl; }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

struct Command {
  std::function<Json(const Json&)> normalize;  // parse, validate, echo with defaults
  std::function<heattracer::ExperimentOutput(const Json&)> run;
  std::map<std::string, std::vector<std::string>> schemas;
};

template <class Cfg>
Command make_command(Cfg (*parse)(const Json&),
                     heattracer::ExperimentOutput (*run)(const Cfg&),
                     std::map<std::string, std::vector<std::string>> schemas) {
  Command c;
  c.normalize = [parse](const Json& j) { return heattracer::to_json(parse(j)); };
  c.run = [parse, run](const Json& j) { return run(parse(j)); };
  c.schemas = std::move(schemas);
  return c;
}

std::map<std::string, Command> commands() {
  using namespace heattracer;
  std::map<std::string, Command> m;
  m["sample-env"] = make_command(
      &parse_sample_env, &run_sample_env,
      {{"snapshot.csv", {"x", "u", "ux", "uxx"}},
       {"covariance.csv", {"pair", "t_a", "x_a", "t_b", "x_b", "empirical", "se", "oracle", "z"}}});
  m["short-time"] = make_command(
      &parse_short_time, &run_short_time,
      {{"moments.csv", {"t", "second_moment", "se"}},
       {"samples.csv", {"env", "x_scaled_theta_<theta>...", "functional_theta_<theta>..."}}});
  m["long-time"] = make_command(&parse_long_time, &run_long_time,
                                {{"long_time.csv", {"env", "T", "y1", "gap", "z1"}},
                                 {"jumps.csv", {"env", "t_jump", "T", "ws"}}});
  m["zeros"] = make_command(
      &parse_zeros, &run_zeros,
      {{"z_samples.csv", {"env", "z1", "zT"}},
       {"roundtrip.csv", {"env", "start", "end", "residual", "zero_tol"}},
       {"curves.csv", {"curve_id", "t", "x", "kind", "origin_sign"}},
       {"events.csv", {"t", "x", "curve_id_stable", "curve_id_unstable"}}});
  m["rough-crossover"] = make_command(
      &parse_rough_crossover, &run_rough_crossover,
      {{"moments_lambda_<lambda>.csv",
        {"t", "second_moment", "se", "subdiffusive_ratio", "diffusive_ratio"}}});
  return m;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Options {
  std::string subcommand;
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

Json load_config(const Options& opt) {
  if (!fs::exists(opt.config)) {
    throw heattracer::ConfigError("config file not found: " + opt.config);
  }
  std::ifstream is(opt.config);
  if (!is) throw heattracer::ConfigError("cannot read config file: " + opt.config);
  Json j;
  try {
    j = Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw heattracer::ConfigError("invalid JSON in " + opt.config + ": " + e.what());
  }
  if (j.is_object() && j.contains("manifest_format")) {
    if (j.value("subcommand", "") != opt.subcommand) {
      throw heattracer::ConfigError("manifest " + opt.config + " was written by subcommand '" +
                                    j.value("subcommand", "") + "'");
    }
    j = j.at("config");
  }
  if (!j.is_object()) throw heattracer::ConfigError("config " + opt.config + " is not a JSON object");
  if (opt.seed) j["base_seed"] = *opt.seed;
  if (opt.workers) j["workers"] = *opt.workers;
  return j;
}

int run(const Options& opt) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const auto table = commands();
  const Command& cmd = table.at(opt.subcommand);

  log("loading config " + opt.config);
  const Json config = cmd.normalize(load_config(opt));
  const std::string canonical = config.dump();

  Json manifest;
  manifest["manifest_format"] = kManifestFormat;
  manifest["subcommand"] = opt.subcommand;
  manifest["version"] = heattracer::kVersion;
  manifest["config_hash"] = "fnv1a64:" + hex(fnv1a(canonical));
  manifest["config"] = config;
  Json ledger;
  if (config.contains("n_env")) {
    ledger["base_seed"] = config["base_seed"];
    ledger["n_env"] = config["n_env"];
    ledger["rule"] = "environment i uses seed base_seed + i";
    if (config.contains("reference_offset")) {
      ledger["reference_base_seed"] =
          config["base_seed"].get<std::uint64_t>() + config["reference_offset"].get<std::uint64_t>();
      ledger["reference_n_env"] = config["reference_n_env"];
    }
  } else {
    ledger["base_seed"] = config["base_seed"];
    ledger["paths"] = config["paths"];
    ledger["rule"] = "path i of every lambda uses seed base_seed + i";
  }
  manifest["seed_ledger"] = ledger;
  Json schemas;
  for (const auto& [name, cols] : cmd.schemas) schemas[name] = cols;
  manifest["csv"] = {{"format", heattracer::kCsvFormat}, {"schemas", schemas}};

  const fs::path out(opt.out);
  fs::create_directories(out);
  log("writing manifest " + (out / "manifest.json").string());
  write_file(out / "manifest.json", manifest.dump(2) + "\n");

  log("running " + opt.subcommand);
  const heattracer::ExperimentOutput result = cmd.run(config);

  log("writing report and tables");
  write_file(out / "report.json", result.report.dump(2) + "\n");
  Json outputs = Json::array({"report.json"});
  for (const auto& t : result.tables) {
    write_file(out / t.name, t.str());
    outputs.push_back(t.name);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Json info = {{"started", iso_time(started)},
               {"wall_seconds", wall},
               {"workers", config.value("workers", 1)},
               {"outputs", outputs}};
  write_file(out / "run_info.json", info.dump(2) + "\n");
  log("done in " + std::to_string(wall) + " s");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Passive tracer in a heat-evolved Brownian velocity field"};
  app.require_subcommand(1);
  Options opt;
  for (const auto& [name, cmd] : commands()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", opt.config, "JSON config or a previous manifest.json")->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "base seed override");
    sub->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->callback([&opt, name = name]() { opt.subcommand = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  try {
    return run(opt);
  } catch (const heattracer::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << std::endl;
    return kExitRuntime;
  }
}
