// dntsim: run, sweep, validate and replay the simulation pipelines from JSON
// configs. Exit codes: 0 ok, 1 config error, 2 runtime error.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dnt/error.hpp"
#include "dnt/harness/config.hpp"
#include "dnt/harness/experiment.hpp"
#include "dnt/netmodel.hpp"
#include "nlohmann/json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dnt::ConfigError("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw dnt::ConfigError(std::string("config parse error: ") + e.what());
  }
}

void print_summary(const dnt::harness::RunSummary& s) {
  std::cout << "config_hash: " << s.config_hash << "\n";
  for (const auto& [name, value] : s.metrics) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    std::cout << name << ": " << buf << "\n";
  }
  std::cout << "wall_seconds: " << s.wall_seconds << "\n";
  for (const std::string& a : s.artifacts) std::cout << "artifact: " << a << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"digital network twin simulation pipelines"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::string trace_path;
  std::vector<std::string> axis_specs;
  int seeds = 1;
  int workers = 0;

  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment");
  run_cmd->add_option("config", config_path, "config JSON path")->required();
  run_cmd->add_option("--output-dir", output_dir, "override the output directory");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep");
  sweep_cmd->add_option("config", config_path, "base config JSON path")->required();
  sweep_cmd->add_option("--axis", axis_specs,
                        "axis spec key.path=v1,v2 (repeatable)");
  sweep_cmd->add_option("--seeds", seeds, "seeds per cell (base seed + i)")
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--output-dir", output_dir, "sweep output directory");
  sweep_cmd->add_option("--workers", workers, "worker pool size (0 = auto)");

  CLI::App* validate_cmd = app.add_subcommand("validate", "validate a config");
  validate_cmd->add_option("config", config_path, "config JSON path")->required();

  CLI::App* replay_cmd =
      app.add_subcommand("replay", "replay a caching run on a stored trace");
  replay_cmd->add_option("trace", trace_path, "trace CSV path")->required();
  replay_cmd->add_option("config", config_path, "config JSON path")->required();
  replay_cmd->add_option("--output-dir", output_dir, "override the output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const auto cfg = dnt::harness::parse_config(load_json(config_path));
      const auto summary = dnt::harness::run_experiment(cfg, output_dir);
      if (!summary.ok) {
        std::cerr << "error: " << summary.error << "\n";
        return kExitRuntimeError;
      }
      print_summary(summary);
      return kExitOk;
    }
    if (sweep_cmd->parsed()) {
      const nlohmann::json base = load_json(config_path);
      // Surface config problems as exit code 1 before any cell runs.
      (void)dnt::harness::parse_config(base);
      std::vector<dnt::harness::SweepAxis> axes;
      for (const std::string& spec : axis_specs)
        axes.push_back(dnt::harness::parse_axis_spec(spec));
      const std::string out =
          output_dir.empty() ? std::string("sweep_out") : output_dir;
      const auto report = dnt::harness::run_sweep(base, axes, seeds, out, workers);
      std::size_t failures = 0;
      for (const auto& cell : report.cells)
        if (!cell.summary.ok) ++failures;
      std::cout << "cells: " << report.cells.size() << " failed: " << failures
                << "\n";
      std::cout << "aggregate: " << report.aggregate_csv << "\n";
      return kExitOk;
    }
    if (validate_cmd->parsed()) {
      const auto cfg = dnt::harness::parse_config(load_json(config_path));
      std::cout << "ok " << dnt::harness::config_hash(cfg) << "\n";
      return kExitOk;
    }
    if (replay_cmd->parsed()) {
      const auto cfg = dnt::harness::parse_config(load_json(config_path));
      if (cfg.pipeline != dnt::harness::Pipeline::Caching)
        throw dnt::ConfigError("replay requires a caching config");
      const dnt::net::RequestTrace trace = dnt::net::read_trace_csv(trace_path);
      const auto summary = dnt::harness::run_experiment(cfg, output_dir, &trace);
      if (!summary.ok) {
        std::cerr << "error: " << summary.error << "\n";
        return kExitRuntimeError;
      }
      print_summary(summary);
      return kExitOk;
    }
  } catch (const dnt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}
