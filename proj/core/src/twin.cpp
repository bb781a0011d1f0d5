#include "dnt/twin.hpp"

#include <algorithm>
#include <cmath>

#include "dnt/error.hpp"

namespace dnt::twin {

PhysicalSnapshot snapshot_of(const cache::CacheEnv& env) {
  PhysicalSnapshot snap;
  snap.tick = env.state().tick;
  snap.bs_loads = env.current_loads();
  snap.cache_occupancy.reserve(env.state().bs.size());
  snap.request_freq.reserve(env.state().bs.size());
  for (const auto& bs : env.state().bs) {
    snap.cache_occupancy.push_back(bs.occupied);
    snap.request_freq.push_back(bs.freq);
  }
  return snap;
}

RiskVerdict assess_overload(std::span<const double> loads, int bs_id,
                            const cache::CacheAction& action, double threshold,
                            double load_increment) {
  if (bs_id < 0 || bs_id >= static_cast<int>(loads.size()))
    throw InvalidArgument("assess_overload: unknown bs_id");
  RiskVerdict v;
  if (!action.accept) return v;  // rejecting adds no load
  const double predicted = loads[static_cast<std::size_t>(bs_id)] + load_increment;
  if (predicted > threshold) {
    v.unsafe = true;
    v.reason = "overload";
  }
  return v;
}

NetworkTwin::NetworkTwin(int num_bs, int catalog_size, std::int64_t sync_deadline)
    : num_bs_(num_bs), sync_deadline_(sync_deadline) {
  if (num_bs < 1) throw InvalidArgument("NetworkTwin: num_bs must be >= 1");
  loads_.assign(static_cast<std::size_t>(num_bs), 0.0);
  occupancy_.assign(static_cast<std::size_t>(num_bs), 0);
  freq_.assign(static_cast<std::size_t>(num_bs),
               std::vector<std::uint32_t>(static_cast<std::size_t>(catalog_size), 0));
}

void NetworkTwin::sync(const PhysicalSnapshot& snapshot, std::int64_t tick) {
  if (tick < last_sync_tick_)
    throw InvalidArgument("NetworkTwin::sync: out-of-order snapshot");
  if (static_cast<int>(snapshot.bs_loads.size()) != num_bs_)
    throw InvalidArgument("NetworkTwin::sync: snapshot BS count mismatch");
  loads_ = snapshot.bs_loads;
  occupancy_ = snapshot.cache_occupancy;
  freq_ = snapshot.request_freq;
  last_sync_tick_ = tick;
}

RiskVerdict NetworkTwin::risk_verdict(int bs_id, const cache::CacheAction& action,
                                      double threshold, double load_increment,
                                      std::int64_t now) const {
  RiskVerdict v = assess_overload(loads_, bs_id, action, threshold, load_increment);
  v.degraded = stale(now);
  return v;
}

Forecaster::Forecaster(int catalog, int emb_dim, int hidden, int window,
                       std::uint64_t init_seed) {
  Rng rng(init_seed);
  net_ = learn::GruNet<float>::random(catalog, emb_dim, hidden, window, rng);
}

std::vector<float> Forecaster::forecast(std::span<const std::int32_t> ids) const {
  return net_.probs(ids);
}

std::int32_t Forecaster::predict(std::span<const std::int32_t> ids) const {
  const std::vector<float> p = forecast(ids);
  return static_cast<std::int32_t>(
      std::max_element(p.begin(), p.end()) - p.begin());
}

double Forecaster::train(std::span<const std::int32_t> history, int epochs,
                         float lr, Rng& rng) {
  const int w = net_.window();
  if (static_cast<int>(history.size()) <= w)
    throw InvalidArgument("Forecaster::train: history shorter than window+1");
  const std::size_t windows = history.size() - static_cast<std::size_t>(w);
  std::vector<std::size_t> order(windows);
  for (std::size_t i = 0; i < windows; ++i) order[i] = i;
  double last_epoch_loss = 0.0;
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t idx : order) {
      const auto ids = history.subspan(idx, static_cast<std::size_t>(w));
      total += net_.sgd_window(ids, history[idx + static_cast<std::size_t>(w)], lr);
    }
    last_epoch_loss = total / static_cast<double>(windows);
  }
  return last_epoch_loss;
}

double Forecaster::evaluate(std::span<const std::int32_t> history) const {
  const int w = net_.window();
  if (static_cast<int>(history.size()) <= w)
    throw InvalidArgument("Forecaster::evaluate: history shorter than window+1");
  const std::size_t windows = history.size() - static_cast<std::size_t>(w);
  double total = 0.0;
  for (std::size_t i = 0; i < windows; ++i) {
    const std::vector<float> p = net_.probs(history.subspan(i, static_cast<std::size_t>(w)));
    const float target_p = p[static_cast<std::size_t>(history[i + static_cast<std::size_t>(w)])];
    total += -std::log(static_cast<double>(target_p) + 1e-12);
  }
  return total / static_cast<double>(windows);
}

Forecaster train_forecaster(std::span<const std::int32_t> history,
                            const ForecasterConfig& config, int catalog_size,
                            std::uint64_t init_seed, Rng& rng) {
  Forecaster f(catalog_size, config.emb_dim, config.hidden, config.window, init_seed);
  f.train(history, config.epochs, config.lr, rng);
  return f;
}

namespace {

std::vector<double> flatten_pmf(const std::vector<float>& p, double temperature) {
  std::vector<double> out(p.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = std::pow(static_cast<double>(p[i]) + 1e-12, 1.0 / temperature);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::size_t draw_from_pmf(const std::vector<double>& pmf, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    acc += pmf[i];
    if (u < acc) return i;
  }
  return pmf.size() - 1;
}

}  // namespace

std::vector<Scenario> generate_scenarios(const Forecaster& model,
                                         std::span<const std::int32_t> context,
                                         int n, double rarity_mix,
                                         const ScenarioConfig& config, Rng& rng) {
  if (n < 1) throw InvalidArgument("generate_scenarios: n must be >= 1");
  if (rarity_mix < 0.0 || rarity_mix > 1.0)
    throw InvalidArgument("generate_scenarios: rarity_mix must be in [0,1]");
  const std::vector<float> base = model.forecast(context);
  std::vector<double> common_pmf(base.begin(), base.end());
  const std::vector<double> rare_pmf = flatten_pmf(base, config.rare_temperature);

  const int rare_count = static_cast<int>(std::llround(rarity_mix * n));
  std::vector<Scenario> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Scenario sc;
    sc.label = i < rare_count ? ScenarioLabel::Rare : ScenarioLabel::Common;
    const std::vector<double>& pmf =
        sc.label == ScenarioLabel::Rare ? rare_pmf : common_pmf;
    sc.segment.reserve(static_cast<std::size_t>(config.segment_requests));
    for (int r = 0; r < config.segment_requests; ++r) {
      net::Request req;
      req.time = r;
      req.content_id = static_cast<std::int32_t>(draw_from_pmf(pmf, rng));
      req.client_id = static_cast<std::int32_t>(rng.below(
          static_cast<std::uint64_t>(config.num_clients)));
      req.bs_id = req.client_id % config.num_bs;
      sc.segment.push_back(req);
    }
    sc.initial_loads.resize(static_cast<std::size_t>(config.num_bs));
    for (double& l : sc.initial_loads) l = rng.uniform(0.0, config.max_initial_load);
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace dnt::twin
