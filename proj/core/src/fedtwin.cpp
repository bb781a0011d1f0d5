#include "dnt/fedtwin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "dnt/csvio.hpp"
#include "dnt/error.hpp"
#include "nlohmann/json.hpp"

namespace dnt::fed {

double AffinityGraph::total_weight() const {
  double m = 0.0;
  for (const Edge& e : edges) m += e.w;
  return m;
}

std::vector<double> AffinityGraph::weighted_degrees() const {
  std::vector<double> deg(static_cast<std::size_t>(n), 0.0);
  for (const Edge& e : edges) {
    deg[static_cast<std::size_t>(e.u)] += e.w;
    deg[static_cast<std::size_t>(e.v)] += e.w;
  }
  return deg;
}

namespace {

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Area of the intersection of two circles divided by the area of the
/// smaller one; 1 when contained, 0 when disjoint.
double circle_overlap_ratio(double d, double r1, double r2) {
  if (r1 <= 0.0 || r2 <= 0.0) return 0.0;
  const double rs = std::min(r1, r2), rl = std::max(r1, r2);
  if (d >= r1 + r2) return 0.0;
  if (d <= rl - rs) return 1.0;
  auto sq = [](double x) { return x * x; };
  const double d1 = (sq(d) - sq(rs) + sq(rl)) / (2.0 * d);
  const double d2 = d - d1;
  const double lens = sq(rl) * std::acos(std::clamp(d1 / rl, -1.0, 1.0)) -
                      d1 * std::sqrt(std::max(0.0, sq(rl) - sq(d1))) +
                      sq(rs) * std::acos(std::clamp(d2 / rs, -1.0, 1.0)) -
                      d2 * std::sqrt(std::max(0.0, sq(rs) - sq(d2)));
  const double small_area = 3.14159265358979323846 * sq(rs);
  return std::clamp(lens / small_area, 0.0, 1.0);
}

}  // namespace

AffinityGraph build_affinity(std::span<const BsAttributes> attrs,
                             const AffinityWeights& weights) {
  const int n = static_cast<int>(attrs.size());
  if (n < 2) throw InvalidArgument("build_affinity: need at least 2 nodes");
  double cap_max = 0.0;
  for (const BsAttributes& a : attrs) cap_max = std::max(cap_max, a.backhaul_capacity);

  AffinityGraph g;
  g.n = n;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const BsAttributes& a = attrs[static_cast<std::size_t>(i)];
      const BsAttributes& b = attrs[static_cast<std::size_t>(j)];
      const double dist = std::hypot(a.x - b.x, a.y - b.y);
      const double prox = std::exp(-dist / weights.distance_scale);
      const double back =
          cap_max > 0.0 ? std::min(a.backhaul_capacity, b.backhaul_capacity) / cap_max
                        : 0.0;
      const double over = circle_overlap_ratio(dist, a.coverage_radius, b.coverage_radius);
      const double traf = cosine_similarity(a.traffic_histogram, b.traffic_histogram);
      const double w = weights.proximity * prox + weights.backhaul * back +
                       weights.overlap * over + weights.traffic * traf;
      if (w > weights.prune_epsilon) g.edges.push_back({i, j, w});
    }
  }
  return g;
}

int ClusterPartition::num_clusters() const {
  int mx = -1;
  for (int c : assignment) mx = std::max(mx, c);
  return mx + 1;
}

double modularity(const AffinityGraph& graph, std::span<const int> assignment) {
  if (static_cast<int>(assignment.size()) != graph.n)
    throw InvalidArgument("modularity: assignment size mismatch");
  const double m = graph.total_weight();
  if (m <= 0.0) return 0.0;
  int num_c = 0;
  for (int c : assignment) {
    if (c < 0) throw InvalidArgument("modularity: negative cluster id");
    num_c = std::max(num_c, c + 1);
  }
  std::vector<double> intra(static_cast<std::size_t>(num_c), 0.0);
  std::vector<double> degree(static_cast<std::size_t>(num_c), 0.0);
  for (const Edge& e : graph.edges) {
    const int cu = assignment[static_cast<std::size_t>(e.u)];
    const int cv = assignment[static_cast<std::size_t>(e.v)];
    if (cu == cv) intra[static_cast<std::size_t>(cu)] += e.w;
    degree[static_cast<std::size_t>(cu)] += e.w;
    degree[static_cast<std::size_t>(cv)] += e.w;
  }
  double q = 0.0;
  for (int c = 0; c < num_c; ++c) {
    const double dc = degree[static_cast<std::size_t>(c)];
    q += intra[static_cast<std::size_t>(c)] / m - (dc / (2.0 * m)) * (dc / (2.0 * m));
  }
  return q;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<std::size_t>(b)] = a;
    return true;
  }
};

int component_count(int n, const std::vector<Edge>& edges,
                    const std::vector<bool>& removed, std::vector<int>* labels) {
  UnionFind uf(n);
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (!removed[i]) uf.unite(edges[i].u, edges[i].v);
  std::map<int, int> relabel;
  int next = 0;
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    const int root = uf.find(v);
    auto [it, inserted] = relabel.emplace(root, next);
    if (inserted) ++next;
    out[static_cast<std::size_t>(v)] = it->second;
  }
  if (labels) *labels = std::move(out);
  return next;
}

}  // namespace

ClusterPartition cluster_fixed_k(const AffinityGraph& graph, int k) {
  if (k < 1 || k > graph.n)
    throw InvalidArgument("cluster_fixed_k: K must be in [1, node count]");
  std::vector<std::size_t> order(graph.edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Edge& ea = graph.edges[a];
    const Edge& eb = graph.edges[b];
    if (ea.w != eb.w) return ea.w < eb.w;
    if (ea.u != eb.u) return ea.u < eb.u;
    return ea.v < eb.v;
  });
  std::vector<bool> removed(graph.edges.size(), false);
  std::vector<int> labels;
  int components = component_count(graph.n, graph.edges, removed, &labels);
  if (components > k)
    throw InvalidArgument(
        "cluster_fixed_k: graph already has more components than K");
  for (std::size_t i = 0; components < k; ++i) {
    // Removing every edge yields n >= k components, so i stays in range.
    removed[order[i]] = true;
    components = component_count(graph.n, graph.edges, removed, &labels);
  }
  ClusterPartition p;
  p.assignment = std::move(labels);
  p.q = modularity(graph, p.assignment);
  return p;
}

namespace {

// Internal weighted graph for the aggregation phases; self-loops allowed.
struct WorkGraph {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> adj;  // neighbor, weight
  std::vector<double> self_loop;
  double m = 0.0;  // total weight, self-loops counted once

  std::vector<double> degrees() const {
    std::vector<double> d(static_cast<std::size_t>(n), 0.0);
    for (int v = 0; v < n; ++v) {
      for (const auto& [u, w] : adj[static_cast<std::size_t>(v)]) d[static_cast<std::size_t>(v)] += w;
      d[static_cast<std::size_t>(v)] += 2.0 * self_loop[static_cast<std::size_t>(v)];
    }
    return d;
  }
};

WorkGraph to_work_graph(const AffinityGraph& g) {
  WorkGraph wg;
  wg.n = g.n;
  wg.adj.resize(static_cast<std::size_t>(g.n));
  wg.self_loop.assign(static_cast<std::size_t>(g.n), 0.0);
  for (const Edge& e : g.edges) {
    wg.adj[static_cast<std::size_t>(e.u)].push_back({e.v, e.w});
    wg.adj[static_cast<std::size_t>(e.v)].push_back({e.u, e.w});
    wg.m += e.w;
  }
  return wg;
}

double work_modularity(const WorkGraph& g, const std::vector<int>& comm) {
  if (g.m <= 0.0) return 0.0;
  int num_c = 0;
  for (int c : comm) num_c = std::max(num_c, c + 1);
  std::vector<double> intra(static_cast<std::size_t>(num_c), 0.0);
  std::vector<double> deg(static_cast<std::size_t>(num_c), 0.0);
  const std::vector<double> nd = g.degrees();
  for (int v = 0; v < g.n; ++v) {
    const int cv = comm[static_cast<std::size_t>(v)];
    deg[static_cast<std::size_t>(cv)] += nd[static_cast<std::size_t>(v)];
    intra[static_cast<std::size_t>(cv)] += g.self_loop[static_cast<std::size_t>(v)];
    for (const auto& [u, w] : g.adj[static_cast<std::size_t>(v)])
      if (u > v && comm[static_cast<std::size_t>(u)] == cv) intra[static_cast<std::size_t>(cv)] += w;
  }
  double q = 0.0;
  for (int c = 0; c < num_c; ++c)
    q += intra[static_cast<std::size_t>(c)] / g.m -
         (deg[static_cast<std::size_t>(c)] / (2.0 * g.m)) * (deg[static_cast<std::size_t>(c)] / (2.0 * g.m));
  return q;
}

// One Louvain level: greedy local moves until no positive gain. Returns the
// node -> community map (dense ids) and whether anything moved.
bool louvain_local_moves(const WorkGraph& g, std::vector<int>& comm) {
  const double two_m = 2.0 * g.m;
  std::vector<double> node_degree = g.degrees();
  int num_c = 0;
  for (int c : comm) num_c = std::max(num_c, c + 1);
  std::vector<double> sigma_tot(static_cast<std::size_t>(num_c), 0.0);
  for (int v = 0; v < g.n; ++v)
    sigma_tot[static_cast<std::size_t>(comm[static_cast<std::size_t>(v)])] +=
        node_degree[static_cast<std::size_t>(v)];

  bool any_move = false;
  bool improved = true;
  while (improved) {
    improved = false;
    for (int v = 0; v < g.n; ++v) {
      const int home = comm[static_cast<std::size_t>(v)];
      // Weight from v to each neighboring community (self-loop excluded).
      std::map<int, double> links;
      for (const auto& [u, w] : g.adj[static_cast<std::size_t>(v)])
        links[comm[static_cast<std::size_t>(u)]] += w;
      const double k_v = node_degree[static_cast<std::size_t>(v)];
      const double w_home = links.count(home) ? links[home] : 0.0;
      sigma_tot[static_cast<std::size_t>(home)] -= k_v;

      int best_comm = home;
      double best_gain = 0.0;
      for (const auto& [c, w_c] : links) {
        if (c == home) continue;
        const double gain =
            (w_c - w_home) / g.m -
            k_v * (sigma_tot[static_cast<std::size_t>(c)] -
                   sigma_tot[static_cast<std::size_t>(home)]) /
                (two_m * g.m);
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_comm = c;
        }
      }
      sigma_tot[static_cast<std::size_t>(best_comm)] += k_v;
      if (best_comm != home) {
        comm[static_cast<std::size_t>(v)] = best_comm;
        improved = true;
        any_move = true;
      }
    }
  }
  return any_move;
}

void densify(std::vector<int>& comm) {
  std::map<int, int> relabel;
  int next = 0;
  for (int& c : comm) {
    auto [it, inserted] = relabel.emplace(c, next);
    if (inserted) ++next;
    c = it->second;
  }
}

WorkGraph aggregate_graph(const WorkGraph& g, const std::vector<int>& comm, int num_c) {
  WorkGraph out;
  out.n = num_c;
  out.adj.resize(static_cast<std::size_t>(num_c));
  out.self_loop.assign(static_cast<std::size_t>(num_c), 0.0);
  out.m = g.m;
  std::map<std::pair<int, int>, double> agg;
  for (int v = 0; v < g.n; ++v) {
    const int cv = comm[static_cast<std::size_t>(v)];
    out.self_loop[static_cast<std::size_t>(cv)] += g.self_loop[static_cast<std::size_t>(v)];
    for (const auto& [u, w] : g.adj[static_cast<std::size_t>(v)]) {
      if (u < v) continue;
      const int cu = comm[static_cast<std::size_t>(u)];
      if (cu == cv) {
        out.self_loop[static_cast<std::size_t>(cv)] += w;
      } else {
        agg[{std::min(cu, cv), std::max(cu, cv)}] += w;
      }
    }
  }
  for (const auto& [key, w] : agg) {
    out.adj[static_cast<std::size_t>(key.first)].push_back({key.second, w});
    out.adj[static_cast<std::size_t>(key.second)].push_back({key.first, w});
  }
  return out;
}

}  // namespace

ClusterPartition cluster_modularity(const AffinityGraph& graph) {
  ClusterPartition p;
  p.assignment.resize(static_cast<std::size_t>(graph.n));
  std::iota(p.assignment.begin(), p.assignment.end(), 0);
  if (graph.edges.empty()) {
    p.q = 0.0;  // all singletons by definition
    return p;
  }

  WorkGraph level = to_work_graph(graph);
  std::vector<int> node_to_final(p.assignment);  // original node -> community
  double prev_q = work_modularity(level, node_to_final);

  while (true) {
    std::vector<int> comm(static_cast<std::size_t>(level.n));
    std::iota(comm.begin(), comm.end(), 0);
    const bool moved = louvain_local_moves(level, comm);
    if (!moved) break;
    densify(comm);
    // Compose into the original-node mapping.
    for (int v = 0; v < graph.n; ++v)
      node_to_final[static_cast<std::size_t>(v)] =
          comm[static_cast<std::size_t>(node_to_final[static_cast<std::size_t>(v)])];
    const double q = modularity(graph, node_to_final);
    if (q <= prev_q + 1e-9) {
      prev_q = std::max(prev_q, q);
      break;
    }
    prev_q = q;
    int num_c = 0;
    for (int c : comm) num_c = std::max(num_c, c + 1);
    if (num_c == level.n) break;
    level = aggregate_graph(level, comm, num_c);
  }

  densify(node_to_final);
  p.assignment = std::move(node_to_final);
  p.q = modularity(graph, p.assignment);
  return p;
}

learn::ParamVector aggregate_sync(std::span<const ModelUpdate> updates,
                                  double participation_fraction, Rng& rng) {
  if (updates.empty()) throw InvalidArgument("aggregate_sync: no updates");
  if (participation_fraction <= 0.0 || participation_fraction > 1.0)
    throw InvalidArgument("aggregate_sync: fraction must be in (0, 1]");
  // Canonical order by client id makes the draw permutation-invariant.
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (updates[a].client_id != updates[b].client_id)
      return updates[a].client_id < updates[b].client_id;
    return updates[a].round_produced < updates[b].round_produced;
  });
  const std::size_t take = static_cast<std::size_t>(
      std::ceil(participation_fraction * static_cast<double>(updates.size())));
  const std::vector<std::size_t> pick =
      rng.sample_without_replacement(updates.size(), take);

  const ModelUpdate& first = updates[order[pick[0]]];
  if (pick.size() == 1) return first.params;  // exact, no rounding

  learn::ParamVector out;
  out.manifest = first.params.manifest;
  std::vector<double> acc(first.params.values.size(), 0.0);
  double total_weight = 0.0;
  for (std::size_t idx : pick) {
    const ModelUpdate& u = updates[order[idx]];
    if (!u.params.same_shape(first.params))
      throw InvalidArgument("aggregate_sync: update shape mismatch");
    if (u.sample_count < 1)
      throw InvalidArgument("aggregate_sync: sample_count must be >= 1");
    const double w = static_cast<double>(u.sample_count);
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] += w * static_cast<double>(u.params.values[i]);
    total_weight += w;
  }
  out.values.resize(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i)
    out.values[i] = static_cast<float>(acc[i] / total_weight);
  return out;
}

void apply_async(AsyncState& state, const ModelUpdate& update) {
  if (update.round_produced > state.current_version)
    throw InvalidArgument("apply_async: update from the future");
  if (!update.params.same_shape(state.global))
    throw InvalidArgument("apply_async: shape mismatch");
  const std::int64_t tau = state.current_version - update.round_produced;
  const double alpha =
      state.staleness_aware ? state.alpha0 / (1.0 + static_cast<double>(tau))
                            : state.alpha0;
  for (std::size_t i = 0; i < state.global.values.size(); ++i)
    state.global.values[i] = static_cast<float>(
        (1.0 - alpha) * static_cast<double>(state.global.values[i]) +
        alpha * static_cast<double>(update.params.values[i]));
  state.current_version += 1;
}

ClusterPartition reform_clusters(const ClusterPartition& old_partition,
                                 const AffinityGraph& old_graph,
                                 const AffinityGraph& new_graph,
                                 double drift_threshold, ClusterMethod method,
                                 int fixed_k) {
  if (old_graph.n != new_graph.n)
    throw InvalidArgument("reform_clusters: node-set mismatch");
  auto rel_change = [](double before, double after) {
    const double denom = std::max(std::abs(before), 1e-12);
    return std::abs(after - before) / denom;
  };
  bool drifted = rel_change(old_graph.total_weight(), new_graph.total_weight()) >
                 drift_threshold;
  if (!drifted) {
    const std::vector<double> before = old_graph.incident_weight();
    const std::vector<double> after = new_graph.incident_weight();
    for (std::size_t i = 0; i < before.size() && !drifted; ++i)
      drifted = rel_change(before[i], after[i]) > drift_threshold;
  }
  if (!drifted) return old_partition;
  return method == ClusterMethod::FixedK ? cluster_fixed_k(new_graph, fixed_k)
                                         : cluster_modularity(new_graph);
}

// ---------------------------------------------------------------------------
// Federated traffic-prediction experiment.

namespace {

struct ClusterData {
  std::vector<std::int32_t> train;    // content-id sequence
  std::vector<std::int32_t> holdout;  // evaluation windows
};

std::vector<std::int32_t> bs_history(const FedTwinConfig& cfg, int bs) {
  net::ZipfParams zipf{0.8, cfg.catalog_size};
  const std::vector<double> pmf = net::zipf_pmf(zipf);
  Rng rng(derive_seed(cfg.seed, "fed-trace", static_cast<std::uint64_t>(bs)));
  const int shift = (bs * cfg.skew_shift) % cfg.catalog_size;
  std::vector<std::int32_t> ids;
  ids.reserve(static_cast<std::size_t>(cfg.ticks_per_bs));
  std::vector<double> cdf(pmf.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    acc += pmf[i];
    cdf[i] = acc;
  }
  for (std::int64_t t = 0; t < cfg.ticks_per_bs; ++t) {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    int id = static_cast<int>(it == cdf.end() ? cdf.size() - 1
                                              : static_cast<std::size_t>(it - cdf.begin()));
    id = (id + shift) % cfg.catalog_size;
    ids.push_back(static_cast<std::int32_t>(id));
  }
  return ids;
}

std::vector<BsAttributes> synthetic_attributes(const FedTwinConfig& cfg) {
  std::vector<BsAttributes> attrs(static_cast<std::size_t>(cfg.num_bs));
  Rng rng(derive_seed(cfg.seed, "fed-attrs"));
  const int blobs = std::max(1, cfg.fixed_k);
  for (int i = 0; i < cfg.num_bs; ++i) {
    BsAttributes& a = attrs[static_cast<std::size_t>(i)];
    const int blob = i % blobs;
    a.x = 2000.0 * blob + rng.uniform(0.0, 300.0);
    a.y = rng.uniform(0.0, 300.0);
    a.backhaul_capacity = rng.uniform(0.5, 1.0);
    a.coverage_radius = rng.uniform(400.0, 600.0);
    a.traffic_histogram.resize(8);
    for (double& h : a.traffic_histogram) h = rng.uniform(0.1, 1.0);
  }
  return attrs;
}

double holdout_loss(const twin::Forecaster& model,
                    const std::vector<ClusterData>& data) {
  double total = 0.0;
  std::size_t windows = 0;
  const int w = model.window();
  for (const ClusterData& c : data) {
    if (static_cast<int>(c.holdout.size()) <= w) continue;
    total += model.evaluate(c.holdout) *
             static_cast<double>(c.holdout.size() - static_cast<std::size_t>(w));
    windows += c.holdout.size() - static_cast<std::size_t>(w);
  }
  return windows == 0 ? 0.0 : total / static_cast<double>(windows);
}

twin::Forecaster make_model(const FedTwinConfig& cfg) {
  return twin::Forecaster(cfg.catalog_size, cfg.forecaster.emb_dim,
                          cfg.forecaster.hidden, cfg.forecaster.window,
                          derive_seed(cfg.seed, "fed-init"));
}

std::vector<ClusterData> cluster_datasets(const FedTwinConfig& cfg,
                                          const ClusterPartition& partition) {
  const int num_c = partition.num_clusters();
  std::vector<ClusterData> data(static_cast<std::size_t>(num_c));
  for (int bs = 0; bs < cfg.num_bs; ++bs) {
    const std::vector<std::int32_t> hist = bs_history(cfg, bs);
    const std::size_t split = static_cast<std::size_t>(
        (1.0 - cfg.holdout_fraction) * static_cast<double>(hist.size()));
    ClusterData& c = data[static_cast<std::size_t>(
        partition.assignment[static_cast<std::size_t>(bs)])];
    c.train.insert(c.train.end(), hist.begin(), hist.begin() + static_cast<std::ptrdiff_t>(split));
    c.holdout.insert(c.holdout.end(), hist.begin() + static_cast<std::ptrdiff_t>(split), hist.end());
  }
  return data;
}

}  // namespace

FedReport run_fedtwin(const FedTwinConfig& config) {
  if (config.rounds < 1) throw InvalidArgument("run_fedtwin: rounds must be >= 1");
  FedReport report;

  ClusterPartition partition;
  if (config.num_bs == 1) {
    partition.assignment = {0};
    partition.q = 0.0;
  } else {
    const std::vector<BsAttributes> attrs = synthetic_attributes(config);
    const AffinityGraph graph = build_affinity(attrs, AffinityWeights{});
    partition = config.method == ClusterMethod::FixedK
                    ? cluster_fixed_k(graph, std::min(config.fixed_k, config.num_bs))
                    : cluster_modularity(graph);
  }
  report.partition = partition;
  const int num_c = partition.num_clusters();
  const std::vector<ClusterData> data = cluster_datasets(config, partition);

  twin::Forecaster global = make_model(config);
  const int switch_round =
      config.switch_round >= 0 ? config.switch_round : config.rounds / 2;

  // Async bookkeeping: the global version each cluster last pulled, and its
  // parameters at that time.
  AsyncState async;
  async.global = global.params();
  async.alpha0 = 0.6;
  async.staleness_aware = config.staleness_aware;
  std::vector<learn::ParamVector> base_params(static_cast<std::size_t>(num_c),
                                              async.global);
  std::vector<std::int64_t> base_version(static_cast<std::size_t>(num_c), 0);

  Rng part_rng(derive_seed(config.seed, "fed-participation"));

  for (int round = 0; round < config.rounds; ++round) {
    const bool sync_mode = round < switch_round;
    FedRoundRow row;
    row.round = round;
    row.mode = sync_mode ? "sync" : "async";

    if (sync_mode) {
      std::vector<ModelUpdate> updates;
      updates.reserve(static_cast<std::size_t>(num_c));
      for (int c = 0; c < num_c; ++c) {
        twin::Forecaster local = global;
        Rng train_rng(derive_seed(config.seed, "fed-train",
                                  static_cast<std::uint64_t>(c) * 1000003u +
                                      static_cast<std::uint64_t>(round)));
        const ClusterData& cd = data[static_cast<std::size_t>(c)];
        if (static_cast<int>(cd.train.size()) > config.forecaster.window)
          local.train(cd.train, config.epochs_per_round, config.lr, train_rng);
        ModelUpdate u;
        u.params = local.params();
        u.client_id = c;
        u.round_produced = round;
        u.sample_count = std::max<std::int64_t>(
            1, static_cast<std::int64_t>(cd.train.size()) - config.forecaster.window);
        updates.push_back(std::move(u));
      }
      const learn::ParamVector agg =
          aggregate_sync(updates, config.participation, part_rng);
      global.load(agg);
      async.global = agg;
      row.participants = static_cast<int>(
          std::ceil(config.participation * static_cast<double>(num_c)));
      row.max_staleness = 0;
      // Clusters observe the fresh global at the end of a sync round.
      for (int c = 0; c < num_c; ++c) {
        base_params[static_cast<std::size_t>(c)] = agg;
        base_version[static_cast<std::size_t>(c)] = async.current_version;
      }
    } else {
      const int async_round = round - switch_round;
      std::int64_t max_tau = 0;
      for (int c = 0; c < num_c; ++c) {
        const int delay = config.async_delays.empty()
                              ? 0
                              : config.async_delays[static_cast<std::size_t>(c) %
                                                    config.async_delays.size()];
        if (delay == 0 || async_round % (delay + 1) == 0) {
          base_params[static_cast<std::size_t>(c)] = async.global;
          base_version[static_cast<std::size_t>(c)] = async.current_version;
        }
        twin::Forecaster local = global;  // shape donor
        local.load(base_params[static_cast<std::size_t>(c)]);
        Rng train_rng(derive_seed(config.seed, "fed-train",
                                  static_cast<std::uint64_t>(c) * 1000003u +
                                      static_cast<std::uint64_t>(round)));
        const ClusterData& cd = data[static_cast<std::size_t>(c)];
        if (static_cast<int>(cd.train.size()) > config.forecaster.window)
          local.train(cd.train, config.epochs_per_round, config.lr, train_rng);
        ModelUpdate u;
        u.params = local.params();
        u.client_id = c;
        u.round_produced = base_version[static_cast<std::size_t>(c)];
        u.sample_count = 1;
        max_tau = std::max(max_tau, async.current_version - u.round_produced);
        apply_async(async, u);
      }
      global.load(async.global);
      row.participants = num_c;
      row.max_staleness = max_tau;
    }

    row.global_loss = holdout_loss(global, data);
    report.rounds.push_back(row);
  }
  report.final_loss = report.rounds.back().global_loss;
  return report;
}

FedReport run_centralized(const FedTwinConfig& config) {
  if (config.rounds < 1) throw InvalidArgument("run_centralized: rounds must be >= 1");
  FedReport report;
  ClusterPartition partition;
  partition.assignment.assign(static_cast<std::size_t>(config.num_bs), 0);
  partition.q = 0.0;
  report.partition = partition;
  const std::vector<ClusterData> data = cluster_datasets(config, partition);

  twin::Forecaster model = make_model(config);
  for (int round = 0; round < config.rounds; ++round) {
    Rng train_rng(derive_seed(config.seed, "fed-train",
                              static_cast<std::uint64_t>(round)));
    if (static_cast<int>(data[0].train.size()) > config.forecaster.window)
      model.train(data[0].train, config.epochs_per_round, config.lr, train_rng);
    FedRoundRow row;
    row.round = round;
    row.mode = "central";
    row.participants = 1;
    row.max_staleness = 0;
    row.global_loss = holdout_loss(model, data);
    report.rounds.push_back(row);
  }
  report.final_loss = report.rounds.back().global_loss;
  return report;
}

void write_partition_json(const std::string& path, const ClusterPartition& p) {
  nlohmann::json j;
  for (std::size_t i = 0; i < p.assignment.size(); ++i)
    j[std::to_string(i)] = p.assignment[i];
  nlohmann::json root;
  root["assignment"] = j;
  root["modularity"] = p.q;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_partition_json: cannot open " + path);
  out << root.dump(2) << "\n";
}

void write_rounds_csv(const std::string& path, std::span<const FedRoundRow> rows) {
  csv::Writer w(path, {"round", "mode", "global_loss", "participants",
                       "max_staleness"});
  for (const FedRoundRow& r : rows)
    w.row(r.round, r.mode, r.global_loss, r.participants, r.max_staleness);
}

}  // namespace dnt::fed
