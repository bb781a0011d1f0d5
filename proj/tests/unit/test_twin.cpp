#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dnt/error.hpp"
#include "dnt/netmodel.hpp"
#include "dnt/rng.hpp"
#include "dnt/twin.hpp"

using namespace dnt;
using namespace dnt::twin;

TEST_CASE("sync mirrors the snapshot exactly") {
  NetworkTwin tw(5, 10);
  PhysicalSnapshot snap;
  snap.tick = 3;
  snap.bs_loads = {0.1, 0.2, 0.3, 0.4, 0.5};
  snap.cache_occupancy = {1, 2, 3, 4, 5};
  snap.request_freq.assign(5, std::vector<std::uint32_t>(10, 7));
  tw.sync(snap, 3);
  CHECK(tw.loads() == snap.bs_loads);
  CHECK(tw.occupancy() == snap.cache_occupancy);
  CHECK(tw.request_freq() == snap.request_freq);
  CHECK(tw.last_sync_tick() == 3);
}

TEST_CASE("staleness flips past the sync deadline") {
  NetworkTwin tw(2, 4, /*sync_deadline=*/5);
  PhysicalSnapshot snap;
  snap.bs_loads = {0.0, 0.0};
  snap.cache_occupancy = {0, 0};
  snap.request_freq.assign(2, std::vector<std::uint32_t>(4, 0));
  tw.sync(snap, 10);
  CHECK_FALSE(tw.stale(14));
  CHECK_FALSE(tw.stale(15));
  CHECK(tw.stale(20));
}

TEST_CASE("sync is idempotent at the same tick and rejects regressions") {
  NetworkTwin tw(1, 2);
  PhysicalSnapshot snap;
  snap.bs_loads = {0.4};
  snap.cache_occupancy = {1};
  snap.request_freq = {{3, 4}};
  tw.sync(snap, 5);
  tw.sync(snap, 5);  // same tick, same data: no change
  CHECK(tw.loads()[0] == 0.4);
  CHECK_THROWS_AS(tw.sync(snap, 4), InvalidArgument);
}

TEST_CASE("risk verdict projects one request of load") {
  const std::vector<double> loads{0.85, 0.1};
  const cache::CacheAction accept = cache::CacheAction::accept_into(0);
  const RiskVerdict unsafe = assess_overload(loads, 0, accept, 0.8, 0.01);
  CHECK(unsafe.unsafe);
  CHECK(unsafe.reason == "overload");
  CHECK_FALSE(assess_overload(loads, 1, accept, 0.8, 0.01).unsafe);
  CHECK_FALSE(assess_overload(loads, 0, cache::CacheAction::reject(), 0.8, 0.01).unsafe);
  CHECK_THROWS_AS(assess_overload(loads, 7, accept, 0.8, 0.01), InvalidArgument);
}

TEST_CASE("stale twin still answers but flags degraded confidence") {
  NetworkTwin tw(1, 2, 5);
  PhysicalSnapshot snap;
  snap.bs_loads = {0.95};
  snap.cache_occupancy = {0};
  snap.request_freq = {{0, 0}};
  tw.sync(snap, 0);
  const RiskVerdict v = tw.risk_verdict(0, cache::CacheAction::accept_into(0), 0.8,
                                        0.01, /*now=*/100);
  CHECK(v.unsafe);
  CHECK(v.degraded);
}

TEST_CASE("forecaster learns an alternating pattern") {
  std::vector<std::int32_t> history;
  for (int i = 0; i < 300; ++i) history.push_back(i % 2);
  ForecasterConfig cfg;
  cfg.emb_dim = 6;
  cfg.hidden = 12;
  cfg.window = 4;
  cfg.epochs = 6;
  cfg.lr = 0.2f;
  Rng rng(1);
  const Forecaster f = train_forecaster(history, cfg, /*catalog=*/2, 11, rng);

  // Top-1 accuracy over every window of the pattern.
  int correct = 0, total = 0;
  for (std::size_t i = 0; i + 4 < history.size(); ++i) {
    const std::vector<std::int32_t> w(history.begin() + i, history.begin() + i + 4);
    if (f.predict(w) == history[i + 4]) ++correct;
    ++total;
  }
  CHECK(static_cast<double>(correct) / total >= 0.95);

  // Window ending in 0 predicts 1.
  CHECK(f.predict(std::vector<std::int32_t>{1, 0, 1, 0}) == 1);
}

TEST_CASE("forecaster on a constant stream predicts the constant") {
  std::vector<std::int32_t> history(120, 3);
  ForecasterConfig cfg;
  cfg.emb_dim = 4;
  cfg.hidden = 8;
  cfg.window = 4;
  cfg.epochs = 3;
  cfg.lr = 0.1f;
  Rng rng(2);
  const Forecaster f = train_forecaster(history, cfg, /*catalog=*/6, 12, rng);
  CHECK(f.predict(std::vector<std::int32_t>{3, 3, 3, 3}) == 3);
}

TEST_CASE("forecaster on iid zipf converges to the mode item") {
  net::TraceConfig tc;
  tc.zipf = {0.8, 12};
  tc.ticks = 150;
  tc.requests_per_tick = 10;
  Rng trace_rng(31);
  const net::RequestTrace trace = net::generate_trace(tc, trace_rng);
  std::vector<std::int32_t> history(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) history[i] = trace[i].content_id;

  ForecasterConfig cfg;
  cfg.emb_dim = 6;
  cfg.hidden = 12;
  cfg.window = 6;
  cfg.epochs = 2;
  cfg.lr = 0.1f;
  Rng rng(3);
  const Forecaster f = train_forecaster(history, cfg, tc.zipf.catalog_size, 13, rng);
  const std::vector<std::int32_t> window(history.end() - 6, history.end());
  CHECK(f.predict(window) == 0);  // item 0 is the mode of the zipf pmf
}

TEST_CASE("training loss is non-increasing over epochs on a learnable stream") {
  // Stochastic contract: check across several seeds rather than one run.
  std::vector<std::int32_t> history;
  for (int i = 0; i < 240; ++i) history.push_back(i % 3);
  int ok = 0;
  const int runs = 10;
  for (int seed = 0; seed < runs; ++seed) {
    Forecaster f(3, 6, 10, 4, static_cast<std::uint64_t>(seed) + 100);
    Rng rng(static_cast<std::uint64_t>(seed));
    const double first = f.train(history, 1, 0.15f, rng);
    const double second = f.train(history, 1, 0.15f, rng);
    if (second <= first) ++ok;
  }
  CHECK(ok >= static_cast<int>(0.9 * runs));
}

TEST_CASE("forecast validates the window length") {
  Forecaster f(5, 4, 8, 6, 1);
  CHECK_THROWS_AS(f.forecast(std::vector<std::int32_t>{1, 2, 3}), InvalidArgument);
  Rng rng(1);
  CHECK_THROWS_AS(f.train(std::vector<std::int32_t>(4, 0), 1, 0.1f, rng),
                  InvalidArgument);
}

TEST_CASE("scenario labels follow the rarity mix") {
  Forecaster f(20, 4, 8, 4, 5);
  const std::vector<std::int32_t> ctx{1, 2, 3, 4};
  ScenarioConfig cfg;
  cfg.segment_requests = 20;
  Rng rng(7);

  auto all_common = generate_scenarios(f, ctx, 5, 0.0, cfg, rng);
  for (const Scenario& s : all_common) CHECK(s.label == ScenarioLabel::Common);

  auto all_rare = generate_scenarios(f, ctx, 10, 1.0, cfg, rng);
  CHECK(all_rare.size() == 10);
  for (const Scenario& s : all_rare) CHECK(s.label == ScenarioLabel::Rare);

  CHECK_THROWS_AS(generate_scenarios(f, ctx, 0, 0.5, cfg, rng), InvalidArgument);
}

TEST_CASE("scenario generation is deterministic per seed") {
  Forecaster f(15, 4, 8, 4, 6);
  const std::vector<std::int32_t> ctx{0, 1, 2, 3};
  ScenarioConfig cfg;
  Rng a(42), b(42);
  const auto sa = generate_scenarios(f, ctx, 4, 0.5, cfg, a);
  const auto sb = generate_scenarios(f, ctx, 4, 0.5, cfg, b);
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i].segment == sb[i].segment);
    CHECK(sa[i].initial_loads == sb[i].initial_loads);
  }
}

TEST_CASE("rare scenarios shift mass toward tail content") {
  // Train on a skewed stream so the predictive distribution is peaked.
  net::TraceConfig tc;
  tc.zipf = {1.2, 30};
  tc.ticks = 100;
  Rng trace_rng(8);
  const net::RequestTrace trace = net::generate_trace(tc, trace_rng);
  std::vector<std::int32_t> history(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) history[i] = trace[i].content_id;
  ForecasterConfig fc;
  fc.window = 6;
  fc.epochs = 2;
  Rng train_rng(9);
  const Forecaster f = train_forecaster(history, fc, 30, 14, train_rng);

  const std::vector<std::int32_t> ctx(history.end() - 6, history.end());
  ScenarioConfig cfg;
  cfg.segment_requests = 50;
  Rng rng(11);
  const auto rare = generate_scenarios(f, ctx, 500, 1.0, cfg, rng);
  const auto common = generate_scenarios(f, ctx, 500, 0.0, cfg, rng);
  auto mean_rank = [](const std::vector<Scenario>& set) {
    double total = 0.0;
    std::size_t n = 0;
    for (const Scenario& s : set)
      for (const net::Request& r : s.segment) {
        total += r.content_id;
        ++n;
      }
    return total / static_cast<double>(n);
  };
  CHECK(mean_rank(rare) > mean_rank(common));
}
