#pragma once

#include <cstdint>
#include <vector>

#include "dnt/cacheenv.hpp"
#include "dnt/harness/config.hpp"
#include "dnt/netmodel.hpp"

namespace dnt::harness {

struct CachingResult {
  cache::EpisodeMetrics metrics;
  std::vector<cache::EpisodeRow> log;
  double forecaster_final_ce = 0.0;  // 0 when the twin is disabled
};

/// Runs one safe-caching episode: trains the twin forecaster on a history
/// trace, then drives the DQN agent over the main trace with the configured
/// intervention modules. `replay_trace`, when given, substitutes the
/// generated main trace.
CachingResult run_caching(const CachingConfig& config, std::uint64_t seed,
                          const net::RequestTrace* replay_trace = nullptr);

/// Normalized agent features for an observation (all roughly in [0, 1]).
std::vector<float> agent_features(const cache::EnvObservation& obs,
                                  const CachingConfig& config);

}  // namespace dnt::harness
