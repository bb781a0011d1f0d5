#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dnt/learncore/params.hpp"
#include "dnt/netmodel.hpp"
#include "dnt/rng.hpp"
#include "dnt/twin.hpp"

namespace dnt::fed {

struct BsAttributes {
  double x = 0.0, y = 0.0;          // position, meters
  double backhaul_capacity = 1.0;   // Gbps
  double coverage_radius = 500.0;   // meters
  std::vector<double> traffic_histogram;
};

struct AffinityWeights {
  double proximity = 0.25;
  double backhaul = 0.25;
  double overlap = 0.25;
  double traffic = 0.25;
  double distance_scale = 500.0;  // d0 in exp(-dist/d0)
  double prune_epsilon = 1e-9;    // edges below this weight are dropped
};

struct Edge {
  int u = 0, v = 0;
  double w = 0.0;
};

/// Weighted undirected graph over base stations. Edges are stored once with
/// u < v; no self-loops.
struct AffinityGraph {
  int n = 0;
  std::vector<Edge> edges;

  double total_weight() const;
  std::vector<double> weighted_degrees() const;
  std::vector<double> incident_weight() const { return weighted_degrees(); }
};

/// Pairwise affinity from the four attribute components, each normalized to
/// [0, 1]: proximity exp(-d/d0), backhaul min/max capacity ratio, coverage
/// circle overlap (lens area over the smaller circle), and cosine similarity
/// of traffic histograms.
AffinityGraph build_affinity(std::span<const BsAttributes> attrs,
                             const AffinityWeights& weights);

struct ClusterPartition {
  std::vector<int> assignment;  // node -> cluster id (dense, from 0)
  double q = 0.0;               // modularity of the partition

  int num_clusters() const;
  bool operator==(const ClusterPartition&) const = default;
};

/// Weighted modularity Q = sum_c (e_c/m - (d_c/2m)^2). Zero-edge graphs
/// yield Q = 0 by definition.
double modularity(const AffinityGraph& graph, std::span<const int> assignment);

/// Splits into exactly K components by repeatedly deleting the minimum-weight
/// edge (ties by lexicographic endpoint order). Throws if K is out of range
/// or the graph already has more than K components.
ClusterPartition cluster_fixed_k(const AffinityGraph& graph, int k);

/// Louvain-style greedy modularity maximization: local moves to the best
/// neighboring community until no positive gain, then aggregation; repeated
/// until the total gain falls under 1e-9.
ClusterPartition cluster_modularity(const AffinityGraph& graph);

/// One flattened model update from a cluster twin.
struct ModelUpdate {
  learn::ParamVector params;
  int client_id = 0;
  std::int64_t round_produced = 0;
  std::int64_t sample_count = 1;
};

/// Sample-count-weighted average over a seeded subset of ceil(fraction * n)
/// updates. Inputs are canonicalized by client id first, so the result is
/// permutation-invariant.
learn::ParamVector aggregate_sync(std::span<const ModelUpdate> updates,
                                  double participation_fraction, Rng& rng);

struct AsyncState {
  learn::ParamVector global;
  std::int64_t current_version = 0;
  double alpha0 = 0.6;
  bool staleness_aware = true;  // false: fixed alpha0 blending (naive)
};

/// Staleness-aware blend: tau = version - round_produced,
/// alpha = alpha0 / (1 + tau), global <- (1-alpha) global + alpha update.
/// Rejects updates from the future.
void apply_async(AsyncState& state, const ModelUpdate& update);

enum class ClusterMethod { FixedK, Modularity };

/// Reclusters only when the graphs drifted: relative change in total edge
/// weight, or in any node's incident weight, strictly exceeds the threshold.
ClusterPartition reform_clusters(const ClusterPartition& old_partition,
                                 const AffinityGraph& old_graph,
                                 const AffinityGraph& new_graph,
                                 double drift_threshold, ClusterMethod method,
                                 int fixed_k = 0);

/// Federated traffic-prediction experiment: per-cluster forecasters trained
/// on per-cluster request histories, synchronous rounds first, asynchronous
/// staleness-aware rounds after the switch.
struct FedTwinConfig {
  int num_bs = 10;
  ClusterMethod method = ClusterMethod::Modularity;
  int fixed_k = 5;
  int rounds = 20;
  int switch_round = -1;  // -1: rounds/2
  double participation = 1.0;
  int epochs_per_round = 1;
  float lr = 0.05f;
  twin::ForecasterConfig forecaster{/*emb*/ 8, /*hidden*/ 16, /*window*/ 8};
  int catalog_size = 50;
  std::int64_t ticks_per_bs = 200;
  double holdout_fraction = 0.2;
  // Per-cluster pull delays in async mode; cluster i waits delays[i % size]
  // rounds between refreshes of its base model (0 = always fresh).
  std::vector<int> async_delays{0};
  bool staleness_aware = true;
  // Non-iid knob: rotates each BS's popularity ranking by bs_id * skew_shift.
  int skew_shift = 0;
  std::uint64_t seed = 1;
};

struct FedRoundRow {
  int round = 0;
  std::string mode;  // "sync" or "async"
  double global_loss = 0.0;
  int participants = 0;
  std::int64_t max_staleness = 0;
};

struct FedReport {
  std::vector<FedRoundRow> rounds;
  double final_loss = 0.0;
  ClusterPartition partition;
};

FedReport run_fedtwin(const FedTwinConfig& config);

/// Same data, same model, same per-round training streams, but a single
/// model trained directly; the baseline for the degenerate-FL equivalence
/// and the iid-convergence comparison.
FedReport run_centralized(const FedTwinConfig& config);

void write_partition_json(const std::string& path, const ClusterPartition& p);
void write_rounds_csv(const std::string& path, std::span<const FedRoundRow> rows);

}  // namespace dnt::fed
