#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnt/netmodel.hpp"

namespace dnt::cache {

struct RewardSpec {
  double r_hit = 1.0;
  double r_miss = -1.0;
  double c_overload = 2.0;
  double overload_threshold = 0.8;
};

/// Work accounting per request. A cache hit is served locally; a rejected
/// miss is redirected to the origin (no local work by default); an accepted
/// miss pays the backhaul fetch and the cache write on top of serving.
struct LoadModel {
  double work_hit = 1.0;
  double work_install = 3.0;
  double work_origin = 0.0;
  int window = 50;
  double capacity_per_tick = 10.0;
};

struct CacheConfig {
  int num_bs = 5;
  int capacity = 150;
  int catalog_size = 250;
  int num_clients = 20;
  int candidates = 4;  // eviction candidates exposed to the agent
  RewardSpec reward;
  LoadModel load;

  /// Recency value reported for never-cached items.
  double recency_sentinel() const { return load.window * 10.0; }
};

/// accept == false rejects the request. On accept, `slot` picks the cache
/// slot to (over)write; when absent the first free slot is used, which is an
/// error on a full cache.
struct CacheAction {
  bool accept = false;
  std::optional<int> slot;

  static CacheAction reject() { return {false, std::nullopt}; }
  static CacheAction accept_into(int slot) { return {true, slot}; }
};

/// Per-BS cache bookkeeping. `freq` counts every request for an item at this
/// BS (cache-independent); `last_cached` is the install tick, -1 if never.
struct BsCacheState {
  std::vector<std::int32_t> slots;        // content id per slot, -1 empty
  std::vector<std::int32_t> item_slot;    // slot per item, -1 not cached
  std::vector<std::int64_t> last_cached;  // per item
  std::vector<std::uint32_t> freq;        // per item
  std::uint64_t total_requests = 0;
  int occupied = 0;
  net::BaseStation station;
};

struct CacheState {
  std::vector<BsCacheState> bs;
  std::int64_t tick = 0;

  bool operator==(const CacheState& other) const;
};

struct StepInfo {
  bool hit = false;
  bool overload = false;
  double load_after = 0.0;
};

struct EnvObservation {
  std::int32_t bs_id = 0;
  std::int32_t client_id = 0;
  std::int64_t tick = 0;
  std::int32_t requested_item = 0;
  bool req_cached = false;
  double req_recency = 0.0;
  double req_frequency = 0.0;
  std::vector<std::int32_t> candidate_slots;
  std::vector<double> cand_recency;
  std::vector<double> cand_freq;
  // Optional channels, filled by the twin / safety layers.
  std::vector<double> forecast;  // empty or {top1_id, top1_prob, req_prob_lift}
  std::vector<double> loads;     // empty or per-BS loads
  std::vector<double> risky;     // empty or per-BS overload indicators

  int num_bs = 0;

  /// Fixed-order raw feature vector:
  /// [bs one-hot | client_id | req_cached | req_recency | req_frequency |
  ///  cand_recency... | cand_freq... | forecast... | loads... | risky...]
  std::vector<double> features() const;

  bool operator==(const EnvObservation&) const = default;
};

/// Eviction candidates in priority order: free slots first (by index), then
/// occupied slots by (frequency asc, install tick asc, index asc). Always
/// exactly `k` entries; requires capacity >= k.
std::vector<std::int32_t> candidate_slots(const BsCacheState& bs, int k);

CacheState make_initial_state(const CacheConfig& config);

EnvObservation observe_request(const CacheState& state, const net::Request& req,
                               const CacheConfig& config);

struct StepResult {
  double reward = 0.0;
  StepInfo info;
};

/// Pure transition on `state`. A hit serves from cache regardless of the
/// action; the action only governs admission and slot choice on a miss.
/// Throws InvalidArgument for accept-with-no-slot on a full cache.
StepResult cache_step(CacheState& state, const CacheAction& action,
                      const net::Request& req, const CacheConfig& config);

/// Trace-driven wrapper owning the state and request cursor.
class CacheEnv {
 public:
  CacheEnv(CacheConfig config, net::RequestTrace trace);

  /// Resets caches and returns the observation for the first request.
  EnvObservation reset();

  bool done() const { return cursor_ >= trace_.size(); }
  const net::Request& current_request() const;
  EnvObservation observe() const;

  /// Applies the action to the current request and advances the cursor.
  StepResult step(const CacheAction& action);

  const CacheState& state() const { return state_; }
  const CacheConfig& config() const { return config_; }
  const net::RequestTrace& trace() const { return trace_; }
  std::size_t cursor() const { return cursor_; }

  std::vector<double> current_loads() const;

 private:
  CacheConfig config_;
  net::RequestTrace trace_;
  CacheState state_;
  std::size_t cursor_ = 0;
};

struct EpisodeRow {
  std::int64_t tick = 0;
  int bs = 0;
  bool hit = false;
  double reward = 0.0;
  bool intervened = false;
  double max_load = 0.0;
  double min_load = 0.0;
};

struct EpisodeMetrics {
  double hit_rate = 0.0;
  double max_bs_load = 0.0;
  double min_bs_load = 0.0;
  double intervention_rate = 0.0;
  double total_reward = 0.0;
  std::int64_t requests = 0;
  std::int64_t hits = 0;
};

/// Aggregates an episode log; loads are taken from the final row.
EpisodeMetrics episode_metrics(std::span<const EpisodeRow> log);

void write_episode_csv(const std::string& path, std::span<const EpisodeRow> log);

}  // namespace dnt::cache
