#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dnt/cacheenv.hpp"
#include "dnt/learncore/gru.hpp"
#include "dnt/netmodel.hpp"
#include "dnt/rng.hpp"

namespace dnt::twin {

/// Point-in-time copy of the physical network that the twin mirrors.
struct PhysicalSnapshot {
  std::int64_t tick = 0;
  std::vector<double> bs_loads;
  std::vector<int> cache_occupancy;
  std::vector<std::vector<std::uint32_t>> request_freq;  // per BS, per item
};

PhysicalSnapshot snapshot_of(const cache::CacheEnv& env);

struct RiskVerdict {
  bool unsafe = false;
  std::string reason;
  bool degraded = false;  // set when the twin answered while stale
};

/// Shared one-step overload projection: unsafe iff the action admits work
/// that pushes the station past the threshold.
RiskVerdict assess_overload(std::span<const double> loads, int bs_id,
                            const cache::CacheAction& action, double threshold,
                            double load_increment);

/// Mirrored network state. Synchronization is two-way in the pipeline: the
/// environment pushes snapshots in, the policy loop reads verdicts and
/// forecasts back out.
class NetworkTwin {
 public:
  NetworkTwin(int num_bs, int catalog_size, std::int64_t sync_deadline = 5);

  /// Mirrors the snapshot. Rejects snapshots older than the last sync.
  void sync(const PhysicalSnapshot& snapshot, std::int64_t tick);

  bool stale(std::int64_t now) const {
    return now - last_sync_tick_ > sync_deadline_;
  }
  std::int64_t last_sync_tick() const { return last_sync_tick_; }
  const std::vector<double>& loads() const { return loads_; }
  const std::vector<int>& occupancy() const { return occupancy_; }
  const std::vector<std::vector<std::uint32_t>>& request_freq() const {
    return freq_;
  }

  RiskVerdict risk_verdict(int bs_id, const cache::CacheAction& action,
                           double threshold, double load_increment,
                           std::int64_t now) const;

 private:
  int num_bs_;
  std::int64_t sync_deadline_;
  std::int64_t last_sync_tick_ = -1;
  std::vector<double> loads_;
  std::vector<int> occupancy_;
  std::vector<std::vector<std::uint32_t>> freq_;
};

/// One-step request forecaster: float GRU over the recent content-id window.
class Forecaster {
 public:
  Forecaster() = default;
  Forecaster(int catalog, int emb_dim, int hidden, int window, std::uint64_t init_seed);

  int window() const { return net_.window(); }
  int catalog() const { return net_.catalog(); }

  /// Probability vector over the catalog. Throws unless ids.size() == window.
  std::vector<float> forecast(std::span<const std::int32_t> ids) const;

  /// Top-1 prediction for convenience.
  std::int32_t predict(std::span<const std::int32_t> ids) const;

  /// Epoch-shuffled SGD over all sliding windows in `history`. Returns the
  /// mean cross-entropy of the final epoch.
  double train(std::span<const std::int32_t> history, int epochs, float lr, Rng& rng);

  /// Mean cross-entropy over all windows of `history` without training.
  double evaluate(std::span<const std::int32_t> history) const;

  const learn::GruNet<float>& net() const { return net_; }
  learn::GruNet<float>& net() { return net_; }

  learn::ParamVector params() const { return net_.to_param_vector(); }
  void load(const learn::ParamVector& pv) {
    net_ = learn::GruNet<float>::from_param_vector(pv);
  }

 private:
  learn::GruNet<float> net_;
};

struct ForecasterConfig {
  int emb_dim = 16;
  int hidden = 32;
  int window = 16;
  int epochs = 2;
  float lr = 0.05f;
};

/// Trains a fresh forecaster on a request history (content-id sequence).
/// Requires history length > window.
Forecaster train_forecaster(std::span<const std::int32_t> history,
                            const ForecasterConfig& config, int catalog_size,
                            std::uint64_t init_seed, Rng& rng);

enum class ScenarioLabel { Common, Rare };

struct Scenario {
  ScenarioLabel label = ScenarioLabel::Common;
  net::RequestTrace segment;
  std::vector<double> initial_loads;
};

struct ScenarioConfig {
  int segment_requests = 100;
  double rare_temperature = 3.0;  // flattens the predictive pmf toward the tail
  int num_bs = 5;
  int num_clients = 20;
  double max_initial_load = 0.5;
};

/// Samples scenario traces from the forecaster's predictive distribution for
/// the given context window. A `rarity_mix` fraction is drawn from the
/// temperature-flattened distribution and labeled rare.
std::vector<Scenario> generate_scenarios(const Forecaster& model,
                                         std::span<const std::int32_t> context,
                                         int n, double rarity_mix,
                                         const ScenarioConfig& config, Rng& rng);

}  // namespace dnt::twin
