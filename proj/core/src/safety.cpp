#include "dnt/safety.hpp"

#include <algorithm>

#include "dnt/error.hpp"

namespace dnt::safety {

cache::EnvObservation intervene_state(cache::EnvObservation base,
                                      std::span<const double> loads,
                                      double overload_threshold,
                                      const InterventionConfig& config) {
  if (!config.state_enabled) return base;
  base.loads.assign(loads.begin(), loads.end());
  base.risky.resize(loads.size());
  for (std::size_t i = 0; i < loads.size(); ++i)
    base.risky[i] = loads[i] > overload_threshold ? 1.0 : 0.0;
  return base;
}

ActionDecision intervene_action(const cache::CacheAction& proposed,
                                const twin::RiskVerdict& verdict,
                                const cache::EnvObservation& obs,
                                const InterventionConfig& config) {
  ActionDecision d;
  d.final = proposed;
  if (!config.action_enabled || !verdict.unsafe) return d;

  d.intervened = true;
  d.reason = verdict.reason;
  // Cached items always have freq >= 1, so all-zero candidate frequencies
  // mean every exposed candidate is a free slot: the cache is still cold.
  const bool cold_cache =
      !obs.cand_freq.empty() &&
      std::all_of(obs.cand_freq.begin(), obs.cand_freq.end(),
                  [](double f) { return f == 0.0; });

  switch (config.backup) {
    case BackupPolicy::Reject:
      // Rejecting forever would starve an empty cache, so bootstrap installs
      // into the first candidate slot while the cache is still cold.
      if (cold_cache && !obs.req_cached && !obs.candidate_slots.empty())
        d.final = cache::CacheAction::accept_into(obs.candidate_slots.front());
      else
        d.final = cache::CacheAction::reject();
      break;
    case BackupPolicy::AdmitLru:
      if (obs.candidate_slots.empty())
        throw InvalidArgument("intervene_action: no candidate slots available");
      d.final = cache::CacheAction::accept_into(obs.candidate_slots.front());
      break;
  }
  return d;
}

double intervene_reward(double base_reward, std::span<const double> loads,
                        double lambda) {
  if (loads.empty()) throw InvalidArgument("intervene_reward: empty loads");
  const auto [mn, mx] = std::minmax_element(loads.begin(), loads.end());
  return base_reward - lambda * (*mx - *mn);
}

}  // namespace dnt::safety
