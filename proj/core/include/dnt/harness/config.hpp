#pragma once

#include <cstdint>
#include <string>

#include "dnt/cacheenv.hpp"
#include "dnt/driveenv.hpp"
#include "dnt/fedtwin.hpp"
#include "dnt/learncore/dqn.hpp"
#include "dnt/safety.hpp"
#include "dnt/securefrl.hpp"
#include "dnt/twin.hpp"
#include "nlohmann/json_fwd.hpp"

namespace dnt::harness {

enum class Pipeline { Caching, FedTwin, Frl };

const char* pipeline_name(Pipeline p);

/// The safe-caching pipeline: network + CMDP + DQN agent, with the twin and
/// the intervention modules toggled per ablation.
struct CachingConfig {
  // Workload.
  int catalog_size = 250;
  int num_bs = 5;
  int num_clients = 20;
  int requests_per_tick = 10;
  std::int64_t ticks = 5000;
  double zipf_exponent = 0.8;
  double client_skew = 2.0;
  // Cache and load model.
  int cache_capacity = 150;
  int candidates = 4;
  double service_capacity = 10.0;
  int load_window = 50;
  double work_hit = 1.0;
  double work_install = 3.0;
  double work_origin = 0.0;
  cache::RewardSpec reward;
  // Agent.
  learn::DqnHyper agent;
  // Twin (forecast features + risk source).
  bool twin_enabled = false;
  std::int64_t history_ticks = 800;
  twin::ForecasterConfig forecaster;
  std::int64_t sync_deadline = 5;
  // Interventions.
  safety::InterventionConfig interventions;
  bool write_episode_log = true;

  cache::CacheConfig cache_config() const;
  net::TraceConfig trace_config() const;
};

struct ExperimentConfig {
  Pipeline pipeline = Pipeline::Caching;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  CachingConfig caching;
  fed::FedTwinConfig fedtwin;
  frl::FrlConfig frl;
};

/// Strict parse: unknown keys anywhere raise ConfigError with the key path;
/// the seed is mandatory.
ExperimentConfig parse_config(const nlohmann::json& root);
ExperimentConfig load_config_file(const std::string& path);

/// Canonical JSON (sorted keys, normalized numbers) used for hashing and the
/// manifest artifact.
nlohmann::json to_canonical_json(const ExperimentConfig& config);

/// FNV-1a 64 digest of the canonical form, as fixed-width hex.
std::string config_hash(const ExperimentConfig& config);

}  // namespace dnt::harness
