#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "dnt/error.hpp"
#include "dnt/netmodel.hpp"
#include "dnt/rng.hpp"

using namespace dnt;
using namespace dnt::net;

TEST_CASE("zipf_pmf single item is forced") {
  const auto pmf = zipf_pmf({0.8, 1});
  REQUIRE(pmf.size() == 1);
  CHECK(pmf[0] == doctest::Approx(1.0));
}

TEST_CASE("zipf_pmf matches direct normalization for p=0.8, size=3") {
  // Oracle recomputed here: weights {1, 2^-0.8, 3^-0.8}.
  const double w0 = 1.0, w1 = std::pow(2.0, -0.8), w2 = std::pow(3.0, -0.8);
  const double s = w0 + w1 + w2;
  const auto pmf = zipf_pmf({0.8, 3});
  REQUIRE(pmf.size() == 3);
  CHECK(pmf[0] == doctest::Approx(w0 / s).epsilon(1e-12));
  CHECK(pmf[1] == doctest::Approx(w1 / s).epsilon(1e-12));
  CHECK(pmf[2] == doctest::Approx(w2 / s).epsilon(1e-12));
  // The spec's quoted values, to 4 decimals.
  CHECK(pmf[0] == doctest::Approx(0.5026).epsilon(1e-3));
  CHECK(pmf[1] == doctest::Approx(0.2887).epsilon(1e-3));
  CHECK(pmf[2] == doctest::Approx(0.2087).epsilon(1e-3));
}

TEST_CASE("zipf_pmf p=0 is the uniform limit") {
  const auto pmf = zipf_pmf({0.0, 4});
  for (double p : pmf) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("zipf_pmf rejects bad parameters") {
  CHECK_THROWS_AS(zipf_pmf({-0.5, 10}), InvalidArgument);
  CHECK_THROWS_AS(zipf_pmf({0.8, 0}), InvalidArgument);
}

TEST_CASE("zipf_pmf normalization and monotonicity over a parameter grid") {
  for (double p : {0.2, 0.8, 1.0, 2.5, 5.0}) {
    for (int size : {1, 3, 100, 100000}) {
      const auto pmf = zipf_pmf({p, size});
      double sum = 0.0;
      for (double v : pmf) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-9);
      for (std::size_t i = 1; i < pmf.size(); ++i) CHECK(pmf[i] < pmf[i - 1]);
    }
  }
}

TEST_CASE("sampler with a single-item catalog always returns item 0") {
  TraceConfig cfg;
  cfg.zipf = {0.8, 1};
  cfg.ticks = 1;
  RequestSampler sampler(cfg);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sampler.sample(0, rng).content_id == 0);
}

TEST_CASE("sampling is deterministic under a fixed seed") {
  TraceConfig cfg;
  cfg.zipf = {0.8, 50};
  RequestSampler sampler(cfg);
  Rng a(123), b(123);
  const Request ra = sampler.sample(7, a);
  const Request rb = sampler.sample(7, b);
  CHECK(ra == rb);
}

TEST_CASE("empirical top-item frequency matches the analytic pmf") {
  TraceConfig cfg;
  cfg.zipf = {0.8, 100};
  RequestSampler sampler(cfg);
  const double expected = sampler.content_pmf()[0];
  Rng rng(2024);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i)
    if (sampler.sample(0, rng).content_id == 0) ++hits;
  CHECK(std::abs(static_cast<double>(hits) / n - expected) < 0.01);
}

TEST_CASE("request routing pins clients to their home BS") {
  TraceConfig cfg;
  cfg.num_clients = 20;
  cfg.num_bs = 5;
  RequestSampler sampler(cfg);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Request r = sampler.sample(0, rng);
    CHECK(r.bs_id == r.client_id % 5);
  }
}

TEST_CASE("generate_trace basics") {
  TraceConfig cfg;
  cfg.zipf = {0.8, 40};
  cfg.ticks = 0;
  Rng rng(1);
  CHECK(generate_trace(cfg, rng).empty());

  cfg.ticks = 30;
  Rng r1(9), r2(9);
  const RequestTrace t1 = generate_trace(cfg, r1);
  const RequestTrace t2 = generate_trace(cfg, r2);
  CHECK(t1 == t2);
  CHECK(t1.size() == static_cast<std::size_t>(30 * cfg.requests_per_tick));
  for (std::size_t i = 1; i < t1.size(); ++i) CHECK(t1[i].time >= t1[i - 1].time);
}

TEST_CASE("trace histogram approaches the pmf in L1 as length grows") {
  TraceConfig cfg;
  cfg.zipf = {0.8, 30};
  cfg.requests_per_tick = 10;
  const auto pmf = zipf_pmf(cfg.zipf);
  auto l1_for = [&](std::int64_t ticks, std::uint64_t seed) {
    TraceConfig c = cfg;
    c.ticks = ticks;
    Rng rng(seed);
    const RequestTrace t = generate_trace(c, rng);
    std::vector<double> hist(static_cast<std::size_t>(cfg.zipf.catalog_size), 0.0);
    for (const Request& r : t) hist[static_cast<std::size_t>(r.content_id)] += 1.0;
    double l1 = 0.0;
    for (std::size_t i = 0; i < hist.size(); ++i)
      l1 += std::abs(hist[i] / static_cast<double>(t.size()) - pmf[i]);
    return l1;
  };
  const double coarse = l1_for(20, 77);
  const double fine = l1_for(2000, 77);
  CHECK(fine < coarse);
  CHECK(fine < 0.05);
}

TEST_CASE("trace CSV round-trips") {
  TraceConfig cfg;
  cfg.zipf = {0.8, 25};
  cfg.ticks = 10;
  Rng rng(4);
  const RequestTrace t = generate_trace(cfg, rng);
  const std::string path =
      (std::filesystem::temp_directory_path() / "dnt_trace_test.csv").string();
  write_trace_csv(path, t);
  const RequestTrace back = read_trace_csv(path);
  CHECK(t == back);
  std::filesystem::remove(path);
}

TEST_CASE("bs_load arithmetic and clamping") {
  BaseStation bs;
  bs.served = ServiceWindow(10, 10.0);

  SUBCASE("no served requests") { CHECK(bs_load(bs, 10) == 0.0); }

  SUBCASE("53 served over a 10-tick window at capacity 10 gives 0.53") {
    // Spread 53 work units over the window.
    for (int t = 0; t < 10; ++t) bs.served.add(t, t == 0 ? 8.0 : 5.0);
    CHECK(bs_load(bs, 10) == doctest::Approx(0.53));
  }

  SUBCASE("saturated window is fully loaded and clamped") {
    for (int t = 0; t < 10; ++t) bs.served.add(t, 15.0);
    CHECK(bs_load(bs, 10) == 1.0);
  }

  SUBCASE("monotone in served work") {
    double prev = 0.0;
    for (int i = 0; i < 8; ++i) {
      bs.served.add(0, 1.0);
      const double l = bs_load(bs, 10);
      CHECK(l >= prev);
      prev = l;
    }
  }

  SUBCASE("window roll zero-fills skipped ticks") {
    bs.served.add(0, 10.0);
    CHECK(bs_load(bs, 10) == doctest::Approx(0.1));
    bs.served.roll_to(20);  // everything expires
    CHECK(bs_load(bs, 10) == 0.0);
  }

  SUBCASE("window must be positive") {
    CHECK_THROWS_AS(bs_load(bs, 0), InvalidArgument);
  }
}
