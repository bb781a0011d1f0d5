#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dnt/harness/config.hpp"
#include "dnt/netmodel.hpp"
#include "nlohmann/json_fwd.hpp"

namespace dnt::harness {

struct RunSummary {
  std::string config_hash;
  std::map<std::string, double> metrics;
  double wall_seconds = 0.0;
  std::vector<std::string> artifacts;
  bool ok = true;
  std::string error;
};

/// Executes the configured pipeline and writes metrics.csv, manifest.json and
/// summary.json (plus pipeline artifacts) under the output directory.
/// Identical config + seed produce byte-identical metrics CSVs.
RunSummary run_experiment(const ExperimentConfig& config,
                          const std::string& output_dir_override = "",
                          const net::RequestTrace* replay_trace = nullptr);

struct SweepAxis {
  std::string key;  // dotted path into the config JSON, e.g. "caching.ticks"
  std::vector<nlohmann::json> values;
};

struct SweepCellResult {
  std::size_t cell_index = 0;
  std::map<std::string, std::string> axis_values;
  std::uint64_t seed = 0;
  RunSummary summary;
};

struct SweepReport {
  std::vector<SweepCellResult> cells;
  std::string aggregate_csv;
};

/// Cross-product of the axes, each cell run for `seeds` root seeds
/// (base seed + i). Cells run in a bounded worker pool; results merge by
/// cell index so output is schedule-independent. Failures are recorded and
/// the sweep continues.
SweepReport run_sweep(const nlohmann::json& base_config,
                      const std::vector<SweepAxis>& axes, int seeds,
                      const std::string& output_dir, int workers = 0);

/// Parses "path=v1,v2,..." into an axis; values parse as JSON scalars with
/// string fallback.
SweepAxis parse_axis_spec(const std::string& spec);

}  // namespace dnt::harness
