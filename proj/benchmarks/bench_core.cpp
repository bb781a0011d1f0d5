#include <benchmark/benchmark.h>

#include <vector>

#include "dnt/cacheenv.hpp"
#include "dnt/driveenv.hpp"
#include "dnt/fedtwin.hpp"
#include "dnt/learncore/dqn.hpp"
#include "dnt/learncore/mlp.hpp"
#include "dnt/netmodel.hpp"
#include "dnt/rng.hpp"
#include "dnt/securefrl.hpp"

namespace {

void BM_ZipfPmf(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(dnt::net::zipf_pmf({0.8, size}));
}
BENCHMARK(BM_ZipfPmf)->Arg(250)->Arg(10000);

void BM_SampleRequest(benchmark::State& state) {
  dnt::net::TraceConfig cfg;
  cfg.zipf = {0.8, 250};
  const dnt::net::RequestSampler sampler(cfg);
  dnt::Rng rng(1);
  std::int64_t tick = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sampler.sample(tick++, rng));
}
BENCHMARK(BM_SampleRequest);

void BM_MlpForward(benchmark::State& state) {
  dnt::Rng rng(2);
  const auto net = dnt::learn::Mlp<float>::random({30, 64, 64, 5}, rng);
  std::vector<float> x(30);
  for (float& v : x) v = static_cast<float>(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_MlpForward);

void BM_DqnTrainStep(benchmark::State& state) {
  dnt::Rng rng(3);
  auto online = dnt::learn::Mlp<float>::random({30, 64, 64, 5}, rng);
  auto target = online;
  dnt::learn::ReplayBuffer buffer(4096);
  for (int i = 0; i < 1024; ++i) {
    dnt::learn::Transition t;
    t.s.resize(30);
    t.s2.resize(30);
    for (float& v : t.s) v = static_cast<float>(rng.normal());
    for (float& v : t.s2) v = static_cast<float>(rng.normal());
    t.a = static_cast<std::int32_t>(rng.below(5));
    t.r = static_cast<float>(rng.normal());
    buffer.push(std::move(t));
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(
        dnt::learn::dqn_train_step(online, target, buffer, 0.95, 1e-3, 64, rng));
}
BENCHMARK(BM_DqnTrainStep);

void BM_CacheStep(benchmark::State& state) {
  dnt::cache::CacheConfig cfg;
  dnt::cache::CacheState s = dnt::cache::make_initial_state(cfg);
  dnt::Rng rng(4);
  std::int64_t i = 0;
  for (auto _ : state) {
    const dnt::net::Request r{i / 10,
                              static_cast<std::int32_t>(rng.below(250)),
                              static_cast<std::int32_t>(rng.below(20)),
                              static_cast<std::int32_t>(rng.below(5))};
    const auto cands = dnt::cache::candidate_slots(
        s.bs[static_cast<std::size_t>(r.bs_id)], cfg.candidates);
    benchmark::DoNotOptimize(dnt::cache::cache_step(
        s, dnt::cache::CacheAction::accept_into(cands[0]), r, cfg));
    ++i;
  }
}
BENCHMARK(BM_CacheStep);

void BM_DriveStep(benchmark::State& state) {
  dnt::drive::DriveEnv env;
  dnt::drive::DriveScenario sc;
  sc.profile = dnt::drive::LeaderProfile::StopAndGo;
  sc.horizon = 1 << 30;
  env.reset(sc);
  for (auto _ : state) benchmark::DoNotOptimize(env.step(2));
}
BENCHMARK(BM_DriveStep);

void BM_Louvain30(benchmark::State& state) {
  dnt::Rng rng(5);
  dnt::fed::AffinityGraph g;
  g.n = 30;
  for (int u = 0; u < 30; ++u)
    for (int v = u + 1; v < 30; ++v) {
      const double p = (u / 10 == v / 10) ? 0.8 : 0.05;
      if (rng.uniform() < p) g.edges.push_back({u, v, 1.0});
    }
  for (auto _ : state) benchmark::DoNotOptimize(dnt::fed::cluster_modularity(g));
}
BENCHMARK(BM_Louvain30);

void BM_RobustAggregate(benchmark::State& state) {
  dnt::Rng rng(6);
  std::vector<dnt::fed::ModelUpdate> updates(10);
  for (int i = 0; i < 10; ++i) {
    updates[static_cast<std::size_t>(i)].client_id = i;
    updates[static_cast<std::size_t>(i)].params.manifest = {5000};
    updates[static_cast<std::size_t>(i)].params.values.resize(5000);
    for (float& v : updates[static_cast<std::size_t>(i)].params.values)
      v = static_cast<float>(rng.normal());
  }
  const dnt::frl::RobustRule rule{dnt::frl::RuleKind::DistanceFilter, 0.2, 3.0};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        dnt::frl::robust_aggregate(updates, rule, updates[0].params));
}
BENCHMARK(BM_RobustAggregate);

}  // namespace

BENCHMARK_MAIN();
