#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dnt/cacheenv.hpp"
#include "dnt/twin.hpp"

namespace dnt::safety {

enum class BackupPolicy { Reject, AdmitLru };

/// Switches for the three intervention channels. Any subset may be enabled;
/// a disabled channel is an exact identity.
struct InterventionConfig {
  bool state_enabled = false;
  bool action_enabled = false;
  bool reward_enabled = false;
  double imbalance_lambda = 2.0;
  BackupPolicy backup = BackupPolicy::Reject;
};

/// State channel: appends all per-BS loads plus per-BS risky indicators
/// (load > threshold) to the observation, in BS order.
cache::EnvObservation intervene_state(cache::EnvObservation base,
                                      std::span<const double> loads,
                                      double overload_threshold,
                                      const InterventionConfig& config);

struct ActionDecision {
  cache::CacheAction final;
  bool intervened = false;
  std::string reason;
};

/// Action channel: overrides an unsafe proposal with the backup policy.
/// Default backup rejects; on a completely cold (empty) cache the request is
/// admitted into the first candidate slot instead so the cache can bootstrap.
ActionDecision intervene_action(const cache::CacheAction& proposed,
                                const twin::RiskVerdict& verdict,
                                const cache::EnvObservation& obs,
                                const InterventionConfig& config);

/// Reward channel: shaped = base - lambda * (max(loads) - min(loads)).
double intervene_reward(double base_reward, std::span<const double> loads,
                        double lambda);

/// Running intervention counters for an episode.
struct InterventionLog {
  std::int64_t steps = 0;
  std::int64_t interventions = 0;

  void record(bool intervened) {
    ++steps;
    if (intervened) ++interventions;
  }
  double rate() const {
    return steps == 0 ? 0.0
                      : static_cast<double>(interventions) /
                            static_cast<double>(steps);
  }
};

}  // namespace dnt::safety
