#include "dnt/cacheenv.hpp"

#include <algorithm>

#include "dnt/csvio.hpp"
#include "dnt/error.hpp"

namespace dnt::cache {

bool CacheState::operator==(const CacheState& other) const {
  if (tick != other.tick || bs.size() != other.bs.size()) return false;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    const BsCacheState& a = bs[i];
    const BsCacheState& b = other.bs[i];
    if (a.slots != b.slots || a.item_slot != b.item_slot ||
        a.last_cached != b.last_cached || a.freq != b.freq ||
        a.total_requests != b.total_requests || a.occupied != b.occupied)
      return false;
  }
  return true;
}

std::vector<double> EnvObservation::features() const {
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(num_bs) + 4 + cand_recency.size() +
            cand_freq.size() + forecast.size() + loads.size() + risky.size());
  for (int b = 0; b < num_bs; ++b) f.push_back(b == bs_id ? 1.0 : 0.0);
  f.push_back(static_cast<double>(client_id));
  f.push_back(req_cached ? 1.0 : 0.0);
  f.push_back(req_recency);
  f.push_back(req_frequency);
  f.insert(f.end(), cand_recency.begin(), cand_recency.end());
  f.insert(f.end(), cand_freq.begin(), cand_freq.end());
  f.insert(f.end(), forecast.begin(), forecast.end());
  f.insert(f.end(), loads.begin(), loads.end());
  f.insert(f.end(), risky.begin(), risky.end());
  return f;
}

std::vector<std::int32_t> candidate_slots(const BsCacheState& bs, int k) {
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(k));
  const int capacity = static_cast<int>(bs.slots.size());
  if (k > capacity) throw InvalidArgument("candidate_slots: k exceeds capacity");
  for (int s = 0; s < capacity && static_cast<int>(out.size()) < k; ++s)
    if (bs.slots[static_cast<std::size_t>(s)] < 0) out.push_back(s);
  if (static_cast<int>(out.size()) < k) {
    std::vector<std::int32_t> occupied;
    occupied.reserve(static_cast<std::size_t>(bs.occupied));
    for (int s = 0; s < capacity; ++s)
      if (bs.slots[static_cast<std::size_t>(s)] >= 0) occupied.push_back(s);
    std::sort(occupied.begin(), occupied.end(), [&](std::int32_t a, std::int32_t b) {
      const std::int32_t ia = bs.slots[static_cast<std::size_t>(a)];
      const std::int32_t ib = bs.slots[static_cast<std::size_t>(b)];
      if (bs.freq[ia] != bs.freq[ib]) return bs.freq[ia] < bs.freq[ib];
      if (bs.last_cached[ia] != bs.last_cached[ib])
        return bs.last_cached[ia] < bs.last_cached[ib];
      return a < b;
    });
    for (std::int32_t s : occupied) {
      if (static_cast<int>(out.size()) >= k) break;
      out.push_back(s);
    }
  }
  return out;
}

CacheState make_initial_state(const CacheConfig& config) {
  if (config.num_bs < 1 || config.capacity < 1 || config.catalog_size < 1)
    throw InvalidArgument("CacheConfig: num_bs, capacity, catalog_size must be >= 1");
  if (config.candidates < 1 || config.candidates > config.capacity)
    throw InvalidArgument("CacheConfig: candidates must be in [1, capacity]");
  CacheState state;
  state.tick = 0;
  state.bs.resize(static_cast<std::size_t>(config.num_bs));
  for (int b = 0; b < config.num_bs; ++b) {
    BsCacheState& bs = state.bs[static_cast<std::size_t>(b)];
    bs.slots.assign(static_cast<std::size_t>(config.capacity), -1);
    bs.item_slot.assign(static_cast<std::size_t>(config.catalog_size), -1);
    bs.last_cached.assign(static_cast<std::size_t>(config.catalog_size), -1);
    bs.freq.assign(static_cast<std::size_t>(config.catalog_size), 0);
    bs.station.id = b;
    bs.station.cache_capacity = config.capacity;
    bs.station.served =
        net::ServiceWindow(config.load.window, config.load.capacity_per_tick);
  }
  return state;
}

EnvObservation observe_request(const CacheState& state, const net::Request& req,
                               const CacheConfig& config) {
  if (req.bs_id < 0 || req.bs_id >= config.num_bs)
    throw InvalidArgument("observe_request: bs_id out of range");
  if (req.content_id < 0 || req.content_id >= config.catalog_size)
    throw InvalidArgument("observe_request: content_id out of range");
  const BsCacheState& bs = state.bs[static_cast<std::size_t>(req.bs_id)];
  const double sentinel = config.recency_sentinel();

  EnvObservation obs;
  obs.num_bs = config.num_bs;
  obs.bs_id = req.bs_id;
  obs.client_id = req.client_id;
  obs.tick = req.time;
  obs.requested_item = req.content_id;
  obs.req_cached = bs.item_slot[static_cast<std::size_t>(req.content_id)] >= 0;
  const std::int64_t cached_at = bs.last_cached[static_cast<std::size_t>(req.content_id)];
  obs.req_recency =
      cached_at < 0 ? sentinel
                    : std::min(sentinel, static_cast<double>(req.time - cached_at));
  obs.req_frequency = static_cast<double>(bs.freq[static_cast<std::size_t>(req.content_id)]);

  obs.candidate_slots = candidate_slots(bs, config.candidates);
  obs.cand_recency.resize(obs.candidate_slots.size());
  obs.cand_freq.resize(obs.candidate_slots.size());
  for (std::size_t i = 0; i < obs.candidate_slots.size(); ++i) {
    const std::int32_t item =
        bs.slots[static_cast<std::size_t>(obs.candidate_slots[i])];
    if (item < 0) {
      obs.cand_recency[i] = sentinel;
      obs.cand_freq[i] = 0.0;
    } else {
      obs.cand_recency[i] = std::min(
          sentinel, static_cast<double>(req.time - bs.last_cached[item]));
      obs.cand_freq[i] = static_cast<double>(bs.freq[item]);
    }
  }
  return obs;
}

StepResult cache_step(CacheState& state, const CacheAction& action,
                      const net::Request& req, const CacheConfig& config) {
  if (req.bs_id < 0 || req.bs_id >= config.num_bs)
    throw InvalidArgument("cache_step: bs_id out of range");
  if (req.content_id < 0 || req.content_id >= config.catalog_size)
    throw InvalidArgument("cache_step: content_id out of range");
  BsCacheState& bs = state.bs[static_cast<std::size_t>(req.bs_id)];
  state.tick = req.time;

  const bool hit = bs.item_slot[static_cast<std::size_t>(req.content_id)] >= 0;
  bs.freq[static_cast<std::size_t>(req.content_id)] += 1;
  bs.total_requests += 1;

  double work = 0.0;
  if (hit) {
    work = config.load.work_hit;
  } else if (action.accept) {
    int slot;
    if (action.slot.has_value()) {
      slot = *action.slot;
      if (slot < 0 || slot >= config.capacity)
        throw InvalidArgument("cache_step: slot index out of range");
    } else {
      slot = -1;
      for (int s = 0; s < config.capacity; ++s)
        if (bs.slots[static_cast<std::size_t>(s)] < 0) {
          slot = s;
          break;
        }
      if (slot < 0)
        throw InvalidArgument("cache_step: accept without slot on a full cache");
    }
    const std::int32_t evicted = bs.slots[static_cast<std::size_t>(slot)];
    if (evicted >= 0) {
      bs.item_slot[static_cast<std::size_t>(evicted)] = -1;
    } else {
      bs.occupied += 1;
    }
    bs.slots[static_cast<std::size_t>(slot)] = req.content_id;
    bs.item_slot[static_cast<std::size_t>(req.content_id)] = slot;
    bs.last_cached[static_cast<std::size_t>(req.content_id)] = req.time;
    work = config.load.work_install;
  } else {
    work = config.load.work_origin;
  }

  // Roll every station's window to the request tick so loads stay comparable,
  // then record this station's work.
  for (BsCacheState& other : state.bs) other.station.served.roll_to(req.time);
  bs.station.served.add(req.time, work);

  StepResult result;
  result.info.hit = hit;
  result.info.load_after = bs.station.served.load();
  result.info.overload = result.info.load_after > config.reward.overload_threshold;
  result.reward = (hit ? config.reward.r_hit : config.reward.r_miss) -
                  (result.info.overload ? config.reward.c_overload : 0.0);
  return result;
}

CacheEnv::CacheEnv(CacheConfig config, net::RequestTrace trace)
    : config_(config), trace_(std::move(trace)) {
  if (trace_.empty()) throw InvalidArgument("CacheEnv: trace must be non-empty");
  state_ = make_initial_state(config_);
}

EnvObservation CacheEnv::reset() {
  state_ = make_initial_state(config_);
  cursor_ = 0;
  return observe();
}

const net::Request& CacheEnv::current_request() const {
  if (done()) throw Error("CacheEnv: episode finished");
  return trace_[cursor_];
}

EnvObservation CacheEnv::observe() const {
  return observe_request(state_, current_request(), config_);
}

StepResult CacheEnv::step(const CacheAction& action) {
  const net::Request& req = current_request();
  StepResult r = cache_step(state_, action, req, config_);
  ++cursor_;
  return r;
}

std::vector<double> CacheEnv::current_loads() const {
  std::vector<double> loads(static_cast<std::size_t>(config_.num_bs));
  for (int b = 0; b < config_.num_bs; ++b)
    loads[static_cast<std::size_t>(b)] =
        state_.bs[static_cast<std::size_t>(b)].station.served.load();
  return loads;
}

EpisodeMetrics episode_metrics(std::span<const EpisodeRow> log) {
  if (log.empty()) throw InvalidArgument("episode_metrics: empty log");
  EpisodeMetrics m;
  m.requests = static_cast<std::int64_t>(log.size());
  std::int64_t interventions = 0;
  for (const EpisodeRow& row : log) {
    if (row.hit) ++m.hits;
    if (row.intervened) ++interventions;
    m.total_reward += row.reward;
  }
  m.hit_rate = static_cast<double>(m.hits) / static_cast<double>(m.requests);
  m.intervention_rate =
      static_cast<double>(interventions) / static_cast<double>(m.requests);
  m.max_bs_load = log.back().max_load;
  m.min_bs_load = log.back().min_load;
  return m;
}

void write_episode_csv(const std::string& path, std::span<const EpisodeRow> log) {
  csv::Writer w(path, {"tick", "bs", "hit", "reward", "intervened", "max_load",
                       "min_load"});
  for (const EpisodeRow& r : log)
    w.row(r.tick, r.bs, r.hit, r.reward, r.intervened, r.max_load, r.min_load);
}

}  // namespace dnt::cache
