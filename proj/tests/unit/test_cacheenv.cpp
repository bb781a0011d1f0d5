#include "doctest.h"

#include <cmath>
#include <vector>

#include "dnt/cacheenv.hpp"
#include "dnt/error.hpp"
#include "dnt/rng.hpp"

using namespace dnt;
using namespace dnt::cache;
using dnt::net::Request;
using dnt::net::RequestTrace;

namespace {

CacheConfig small_config() {
  CacheConfig c;
  c.num_bs = 2;
  c.capacity = 4;
  c.catalog_size = 10;
  c.candidates = 2;
  c.load.window = 10;
  c.load.capacity_per_tick = 10.0;
  return c;
}

Request req(std::int64_t t, int item, int client = 0, int bs = 0) {
  return Request{t, item, client, bs};
}

}  // namespace

TEST_CASE("reset yields empty caches and sentinel recency") {
  CacheConfig c;  // defaults: 5 BS x 150 slots
  const CacheState s = make_initial_state(c);
  REQUIRE(s.bs.size() == 5);
  for (const auto& bs : s.bs) {
    CHECK(bs.occupied == 0);
    for (auto slot : bs.slots) CHECK(slot == -1);
  }
  const EnvObservation obs = observe_request(s, req(0, 3), c);
  CHECK(obs.req_recency == c.recency_sentinel());
  CHECK_FALSE(obs.req_cached);
  for (double r : obs.cand_recency) CHECK(r == c.recency_sentinel());

  // Same config + trace give the identical initial observation.
  const CacheState s2 = make_initial_state(c);
  CHECK(observe_request(s2, req(0, 3), c) == obs);
}

TEST_CASE("hits serve from cache regardless of action") {
  const CacheConfig c = small_config();
  CacheState s = make_initial_state(c);
  cache_step(s, CacheAction::accept_into(0), req(0, 7), c);  // install item 7

  const StepResult hit = cache_step(s, CacheAction::reject(), req(1, 7), c);
  CHECK(hit.info.hit);
  CHECK(hit.reward == doctest::Approx(c.reward.r_hit));
  CHECK(s.bs[0].slots[0] == 7);  // still cached
}

TEST_CASE("miss with reject leaves the cache unchanged") {
  const CacheConfig c = small_config();
  CacheState s = make_initial_state(c);
  const CacheState before = s;
  const StepResult r = cache_step(s, CacheAction::reject(), req(0, 3), c);
  CHECK_FALSE(r.info.hit);
  CHECK(r.reward == doctest::Approx(c.reward.r_miss));
  for (auto slot : s.bs[0].slots) CHECK(slot == -1);
  CHECK(s.bs[0].freq[3] == before.bs[0].freq[3] + 1);
}

TEST_CASE("miss with accept installs and evicts the occupant") {
  CacheConfig c = small_config();
  c.capacity = 8;
  CacheState s = make_initial_state(c);
  cache_step(s, CacheAction::accept_into(7), req(0, 2), c);  // occupant X=2
  CHECK(s.bs[0].slots[7] == 2);

  const StepResult r = cache_step(s, CacheAction::accept_into(7), req(5, 9), c);
  CHECK_FALSE(r.info.hit);
  CHECK(s.bs[0].slots[7] == 9);
  CHECK(s.bs[0].item_slot[2] == -1);      // X absent afterward
  CHECK(s.bs[0].last_cached[9] == 5);     // stamped with the install tick
  CHECK(s.bs[0].occupied == 1);
}

TEST_CASE("accept without a slot errors on a full cache and fills otherwise") {
  const CacheConfig c = small_config();  // capacity 4
  CacheState s = make_initial_state(c);
  for (int i = 0; i < 4; ++i)
    cache_step(s, CacheAction{true, std::nullopt}, req(i, i), c);
  CHECK(s.bs[0].occupied == 4);
  CHECK_THROWS_AS(cache_step(s, CacheAction{true, std::nullopt}, req(9, 8), c),
                  InvalidArgument);
}

TEST_CASE("observe reports recency relative to the install tick") {
  const CacheConfig c = small_config();
  CacheState s = make_initial_state(c);
  cache_step(s, CacheAction::accept_into(0), req(90, 4), c);
  const EnvObservation obs = observe_request(s, req(100, 4), c);
  CHECK(obs.req_cached);
  CHECK(obs.req_recency == doctest::Approx(10.0));

  const EnvObservation never = observe_request(s, req(100, 5), c);
  CHECK(never.req_recency == c.recency_sentinel());
}

TEST_CASE("candidate slots rank free first, then least-frequent oldest") {
  CacheConfig c = small_config();
  c.capacity = 4;
  c.candidates = 3;
  CacheState s = make_initial_state(c);
  // Fill slots 0 and 1; item 6 requested twice (higher frequency).
  cache_step(s, CacheAction::accept_into(0), req(0, 6), c);
  cache_step(s, CacheAction::accept_into(1), req(1, 3), c);
  cache_step(s, CacheAction::reject(), req(2, 6), c);
  const auto cands = candidate_slots(s.bs[0], 3);
  REQUIRE(cands.size() == 3);
  CHECK(cands[0] == 2);  // free
  CHECK(cands[1] == 3);  // free
  CHECK(cands[2] == 1);  // item 3 (freq 1) before item 6 (freq 2)
}

TEST_CASE("overload penalty applies when post-step load crosses the threshold") {
  CacheConfig c = small_config();
  c.load.window = 1;
  c.load.capacity_per_tick = 2.0;
  c.load.work_install = 3.0;
  c.reward.overload_threshold = 0.8;
  CacheState s = make_initial_state(c);
  const StepResult r = cache_step(s, CacheAction::accept_into(0), req(0, 1), c);
  // load = 3 / (1 * 2) clamped to 1.0 > 0.8.
  CHECK(r.info.overload);
  CHECK(r.reward ==
        doctest::Approx(c.reward.r_miss - c.reward.c_overload));
}

TEST_CASE("step is a pure transition") {
  const CacheConfig c = small_config();
  Rng rng(12);
  CacheState a = make_initial_state(c);
  CacheState b = make_initial_state(c);
  for (int i = 0; i < 200; ++i) {
    const Request r = req(i / 4, static_cast<int>(rng.below(10)),
                          static_cast<int>(rng.below(4)),
                          static_cast<int>(rng.below(2)));
    const bool accept = rng.uniform() < 0.5;
    CacheAction act = accept
                          ? CacheAction::accept_into(static_cast<int>(rng.below(4)))
                          : CacheAction::reject();
    const StepResult ra = cache_step(a, act, r, c);
    const StepResult rb = cache_step(b, act, r, c);
    CHECK(ra.reward == rb.reward);
    CHECK(ra.info.hit == rb.info.hit);
  }
  CHECK(a == b);
}

TEST_CASE("slot occupancy is conserved and monotone until full") {
  CacheConfig c = small_config();
  c.capacity = 6;
  CacheState s = make_initial_state(c);
  Rng rng(5);
  int prev_occupied = 0;
  bool was_full = false;
  for (int i = 0; i < 500; ++i) {
    const Request r = req(i / 4, static_cast<int>(rng.below(10)));
    const auto cands = candidate_slots(s.bs[0], c.candidates);
    cache_step(s, CacheAction::accept_into(cands[0]), r, c);
    CHECK(s.bs[0].occupied <= c.capacity);
    if (!was_full) {
      CHECK(s.bs[0].occupied >= prev_occupied);
      prev_occupied = s.bs[0].occupied;
      was_full = s.bs[0].occupied == c.capacity;
    }
  }
}

TEST_CASE("episode reward decomposes exactly into hit/miss/overload terms") {
  CacheConfig c = small_config();
  c.load.window = 2;
  c.load.capacity_per_tick = 3.0;  // overloads will happen
  CacheState s = make_initial_state(c);
  Rng rng(77);
  double total = 0.0;
  std::int64_t hits = 0, misses = 0, overloads = 0;
  for (int i = 0; i < 400; ++i) {
    const Request r = req(i / 4, static_cast<int>(rng.below(10)),
                          static_cast<int>(rng.below(4)),
                          static_cast<int>(rng.below(2)));
    const auto cands = candidate_slots(s.bs[static_cast<std::size_t>(r.bs_id)],
                                       c.candidates);
    const bool accept = rng.uniform() < 0.7;
    const StepResult out = cache_step(
        s, accept ? CacheAction::accept_into(cands[0]) : CacheAction::reject(), r, c);
    total += out.reward;
    if (out.info.hit) ++hits; else ++misses;
    if (out.info.overload) ++overloads;
  }
  CHECK(overloads > 0);  // the scenario actually exercises the penalty
  const double reconstructed = c.reward.r_hit * static_cast<double>(hits) +
                               c.reward.r_miss * static_cast<double>(misses) -
                               c.reward.c_overload * static_cast<double>(overloads);
  CHECK(total == doctest::Approx(reconstructed).epsilon(1e-12));
}

TEST_CASE("larger capacity never hits less under the frozen policy") {
  // Cache-independent eviction priority (request frequency) makes this a
  // stack-style policy; replay the same trace at two capacities.
  Rng rng(99);
  RequestTrace trace;
  for (int i = 0; i < 3000; ++i)
    trace.push_back(req(i / 4, static_cast<int>(rng.below(40))));
  auto run_hits = [&](int capacity) {
    CacheConfig c = small_config();
    c.num_bs = 1;
    c.catalog_size = 40;
    c.capacity = capacity;
    CacheState s = make_initial_state(c);
    std::int64_t hits = 0;
    for (const Request& r : trace) {
      const auto cands = candidate_slots(s.bs[0], c.candidates);
      if (cache_step(s, CacheAction::accept_into(cands[0]), r, c).info.hit) ++hits;
    }
    return hits;
  };
  CHECK(run_hits(20) >= run_hits(10));
}

TEST_CASE("episode metrics aggregate hits, rates and final loads") {
  std::vector<EpisodeRow> log;
  for (int i = 0; i < 100; ++i) {
    EpisodeRow row;
    row.tick = i;
    row.bs = 0;
    row.hit = i < 82;
    row.reward = row.hit ? 1.0 : -1.0;
    row.intervened = false;
    row.max_load = 0.53;
    row.min_load = 0.08;
    log.push_back(row);
  }
  const EpisodeMetrics m = episode_metrics(log);
  CHECK(m.hit_rate == doctest::Approx(0.82));
  CHECK(m.max_bs_load == doctest::Approx(0.53));
  CHECK(m.min_bs_load == doctest::Approx(0.08));

  std::vector<EpisodeRow> all_hits(10, EpisodeRow{0, 0, true, 1.0, false, 0.1, 0.0});
  CHECK(episode_metrics(all_hits).hit_rate == doctest::Approx(1.0));

  CHECK_THROWS_AS(episode_metrics(std::vector<EpisodeRow>{}), InvalidArgument);
}

TEST_CASE("cache env wraps the trace with a cursor") {
  const CacheConfig c = small_config();
  RequestTrace trace{req(0, 1), req(0, 2), req(1, 1)};
  CacheEnv env(c, trace);
  env.reset();
  CHECK_FALSE(env.done());
  env.step(CacheAction::accept_into(0));
  const StepResult r2 = env.step(CacheAction::reject());
  CHECK_FALSE(r2.info.hit);
  const StepResult r3 = env.step(CacheAction::reject());
  CHECK(r3.info.hit);  // item 1 cached at step 1
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(CacheAction::reject()), Error);
  CHECK_THROWS_AS(CacheEnv(c, RequestTrace{}), InvalidArgument);
}
