#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dnt/rng.hpp"

namespace dnt::net {

/// Dense content universe; items are 0..size-1 ordered by popularity rank
/// (id 0 most popular).
struct ContentCatalog {
  int size = 0;
};

struct ZipfParams {
  double exponent = 0.8;
  int catalog_size = 0;
};

/// Normalized popularity vector, entry i proportional to 1/(i+1)^p.
/// exponent == 0 yields the uniform distribution; exponent < 0 or an empty
/// catalog is rejected.
std::vector<double> zipf_pmf(const ZipfParams& params);

struct Request {
  std::int64_t time = 0;
  std::int32_t content_id = 0;
  std::int32_t client_id = 0;
  std::int32_t bs_id = 0;

  bool operator==(const Request&) const = default;
};

using RequestTrace = std::vector<Request>;

struct TraceConfig {
  ZipfParams zipf{0.8, 250};
  int num_clients = 20;
  int num_bs = 5;
  int requests_per_tick = 10;
  std::int64_t ticks = 0;
  // Per-request client draw. Real demand is skewed: client c is picked with
  // weight 1/(c+1)^client_skew. Clients are pinned round-robin to a home BS
  // (client c -> BS c % num_bs), so skewed clients make skewed stations.
  double client_skew = 2.0;
};

/// Precomputed cumulative tables for drawing requests.
class RequestSampler {
 public:
  explicit RequestSampler(const TraceConfig& config);

  Request sample(std::int64_t tick, Rng& rng) const;

  const std::vector<double>& content_pmf() const { return content_pmf_; }
  const std::vector<double>& client_pmf() const { return client_pmf_; }
  int home_bs(int client) const { return client % num_bs_; }

 private:
  std::vector<double> content_pmf_, content_cdf_;
  std::vector<double> client_pmf_, client_cdf_;
  int num_bs_;
};

/// Chronological trace of ticks * requests_per_tick requests; a pure function
/// of (config, rng state).
RequestTrace generate_trace(const TraceConfig& config, Rng& rng);

/// CSV with header "tick,content_id,client_id,bs_id".
void write_trace_csv(const std::string& path, const RequestTrace& trace);
RequestTrace read_trace_csv(const std::string& path);

/// Ring buffer of per-tick served work used for the load moving average.
class ServiceWindow {
 public:
  ServiceWindow() : ServiceWindow(50, 10.0) {}
  ServiceWindow(int length, double capacity_per_tick);

  /// Advances the window to `tick`, zero-filling skipped ticks.
  void roll_to(std::int64_t tick);
  /// Adds served work units at `tick` (rolls forward first if needed).
  void add(std::int64_t tick, double units);

  /// Moving-average utilization over the most recent `window` ticks
  /// (full length when 0), clamped to [0, 1].
  double load(int window = 0) const;

  int length() const { return static_cast<int>(ring_.size()); }
  double capacity_per_tick() const { return capacity_; }
  std::int64_t current_tick() const { return tick_; }

 private:
  std::vector<double> ring_;
  double capacity_;
  std::int64_t tick_ = 0;
};

struct BaseStation {
  int id = 0;
  int cache_capacity = 150;
  ServiceWindow served;
};

/// Utilization of a base station over the trailing `window` ticks.
double bs_load(const BaseStation& bs, int window);

}  // namespace dnt::net
