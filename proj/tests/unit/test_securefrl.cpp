#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dnt/error.hpp"
#include "dnt/rng.hpp"
#include "dnt/securefrl.hpp"

using namespace dnt;
using namespace dnt::frl;
using dnt::fed::ModelUpdate;

namespace {

ModelUpdate make_update(std::vector<float> values, int client,
                        std::int64_t count = 1) {
  ModelUpdate u;
  u.params.values = std::move(values);
  u.params.manifest = {static_cast<int>(u.params.values.size())};
  u.client_id = client;
  u.sample_count = count;
  return u;
}

}  // namespace

TEST_CASE("attack transforms") {
  Rng rng(1);
  const ModelUpdate base = make_update({1.f, -2.f}, 0);

  SUBCASE("sign flip negates") {
    const ModelUpdate out = apply_attack(base, {AttackKind::SignFlip, 0, 0}, rng);
    CHECK(out.params.values == std::vector<float>{-1.f, 2.f});
  }

  SUBCASE("scaling by zero equals the zero update") {
    const ModelUpdate scaled =
        apply_attack(base, {AttackKind::ScaledUpdate, 0, 0.0}, rng);
    const ModelUpdate zeroed = apply_attack(base, {AttackKind::ZeroUpdate, 0, 0}, rng);
    CHECK(scaled.params.values == zeroed.params.values);
  }

  SUBCASE("zero-sigma noise is the identity") {
    const ModelUpdate out =
        apply_attack(base, {AttackKind::GaussianNoise, 0.0, 0}, rng);
    CHECK(out.params.values == base.params.values);
  }

  SUBCASE("noise is seeded and reproducible") {
    Rng a(9), b(9);
    const ModelUpdate x = apply_attack(base, {AttackKind::GaussianNoise, 0.5, 0}, a);
    const ModelUpdate y = apply_attack(base, {AttackKind::GaussianNoise, 0.5, 0}, b);
    CHECK(x.params.values == y.params.values);
  }
}

TEST_CASE("coordinate median shrugs off a single outlier") {
  const std::vector<ModelUpdate> ups{make_update({1.f}, 0), make_update({2.f}, 1),
                                     make_update({100.f}, 2)};
  const AggregateOutcome out =
      robust_aggregate(ups, {RuleKind::CoordinateMedian, 0, 0}, ups[0].params);
  CHECK(out.params.values[0] == doctest::Approx(2.0f));
}

TEST_CASE("distance filter drops the far update (worked example)") {
  const std::vector<ModelUpdate> ups{make_update({0.f, 0.f}, 0),
                                     make_update({0.1f, 0.f}, 1),
                                     make_update({10.f, 10.f}, 2)};
  const AggregateOutcome out =
      robust_aggregate(ups, {RuleKind::DistanceFilter, 0, 3.0}, ups[0].params);
  // Median vector [0.1, 0]; distances {0.1, 0, 14.07}; med 0.1, MAD 0.1,
  // threshold 0.4: the third update is dropped, survivors average to
  // [0.05, 0].
  REQUIRE(out.survivors.size() == 2);
  CHECK(out.params.values[0] == doctest::Approx(0.05f));
  CHECK(out.params.values[1] == doctest::Approx(0.0f));
}

TEST_CASE("every rule is a fixed point on identical updates") {
  const std::vector<ModelUpdate> ups{make_update({0.5f, -1.f}, 0),
                                     make_update({0.5f, -1.f}, 1),
                                     make_update({0.5f, -1.f}, 2)};
  for (RuleKind kind : {RuleKind::Mean, RuleKind::CoordinateMedian,
                        RuleKind::TrimmedMean, RuleKind::DistanceFilter}) {
    const AggregateOutcome out =
        robust_aggregate(ups, {kind, 0.2, 3.0}, ups[0].params);
    CHECK(out.params.values[0] == doctest::Approx(0.5f));
    CHECK(out.params.values[1] == doctest::Approx(-1.0f));
  }
}

TEST_CASE("rules are permutation-invariant") {
  Rng rng(5);
  std::vector<ModelUpdate> ups;
  for (int i = 0; i < 7; ++i) {
    std::vector<float> v(4);
    for (float& x : v) x = static_cast<float>(rng.normal());
    ups.push_back(make_update(std::move(v), i));
  }
  std::vector<ModelUpdate> shuffled = ups;
  std::reverse(shuffled.begin(), shuffled.end());
  for (RuleKind kind : {RuleKind::Mean, RuleKind::CoordinateMedian,
                        RuleKind::TrimmedMean, RuleKind::DistanceFilter}) {
    const AggregateOutcome a = robust_aggregate(ups, {kind, 0.2, 3.0}, ups[0].params);
    const AggregateOutcome b =
        robust_aggregate(shuffled, {kind, 0.2, 3.0}, ups[0].params);
    CHECK(a.params.values == b.params.values);
  }
}

TEST_CASE("median stays in the honest range against a sub-majority attack") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int honest = 5;
    const int adversarial = (honest + 1) / 2 - 1 + static_cast<int>(rng.below(2));
    std::vector<ModelUpdate> ups;
    const double lo = -1.0, hi = 1.0;
    for (int i = 0; i < honest; ++i)
      ups.push_back(make_update({static_cast<float>(rng.uniform(lo, hi))}, i));
    for (int i = 0; i < adversarial; ++i)
      ups.push_back(make_update({static_cast<float>(rng.normal(0, 1e6))}, honest + i));
    const AggregateOutcome out =
        robust_aggregate(ups, {RuleKind::CoordinateMedian, 0, 0}, ups[0].params);
    CHECK(out.params.values[0] >= lo);
    CHECK(out.params.values[0] <= hi);
  }
}

TEST_CASE("trimmed mean with beta >= f removes extreme adversaries exactly") {
  // Identical honest values make the exact-recovery statement sharp.
  std::vector<ModelUpdate> ups;
  for (int i = 0; i < 8; ++i) ups.push_back(make_update({0.25f}, i));
  ups.push_back(make_update({1e9f}, 8));
  ups.push_back(make_update({-1e9f}, 9));
  const AggregateOutcome out =
      robust_aggregate(ups, {RuleKind::TrimmedMean, 0.2, 0}, ups[0].params);
  CHECK(out.params.values[0] == 0.25f);

  // Precondition: n must exceed 2 * ceil(beta n).
  std::vector<ModelUpdate> tiny{make_update({1.f}, 0), make_update({2.f}, 1)};
  CHECK_THROWS_AS(
      robust_aggregate(tiny, {RuleKind::TrimmedMean, 0.4, 0}, tiny[0].params),
      InvalidArgument);
}

TEST_CASE("distance filter keeps everyone on iid small noise") {
  int clean_runs = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    Rng rng(static_cast<std::uint64_t>(t) + 500);
    std::vector<ModelUpdate> ups;
    for (int i = 0; i < 10; ++i) {
      std::vector<float> v(6);
      for (float& x : v) x = static_cast<float>(rng.normal(0.0, 0.01));
      ups.push_back(make_update(std::move(v), i));
    }
    const AggregateOutcome out =
        robust_aggregate(ups, {RuleKind::DistanceFilter, 0, 3.0}, ups[0].params);
    CHECK(out.survivors.size() >= 1);  // never empty by construction
    if (out.survivors.size() == 10) ++clean_runs;
  }
  CHECK(clean_runs >= 95);
}

TEST_CASE("twin probe sets are seeded and corner-case heavy") {
  CHECK_THROWS_AS(twin_probe_set(drive::ScenarioRanges{}, 0, 1), InvalidArgument);
  const auto a = twin_probe_set(drive::ScenarioRanges{}, 20, 7);
  const auto b = twin_probe_set(drive::ScenarioRanges{}, 20, 7);
  REQUIRE(a.size() == b.size());
  int hard = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].gap_front == b[i].gap_front);
    if (a[i].profile == drive::LeaderProfile::HardBrake) ++hard;
  }
  CHECK(hard * 2 >= static_cast<int>(a.size()));
}

TEST_CASE("twin validation rejects a reckless aggregate and falls back") {
  // A policy hard-wired to accelerate collides on hard-brake probes.
  learn::Mlp<float> reckless({5, 5});
  reckless.params()[learn::Mlp<float>::param_count({5, 5}) - 1] = 100.0f;  // bias action 4
  const learn::ParamVector bad = reckless.to_param_vector();

  TwinValidator validator(twin_probe_set(drive::ScenarioRanges{}, 20, 3),
                          drive::DriveConfig{});
  CHECK_FALSE(validator.accepts(bad));

  std::vector<ModelUpdate> ups;
  for (int i = 0; i < 3; ++i) {
    ModelUpdate u;
    u.params = bad;
    u.client_id = i;
    ups.push_back(u);
  }
  learn::ParamVector prev;
  prev.manifest = bad.manifest;
  prev.values.assign(bad.values.size(), 0.0f);
  const AggregateOutcome out = robust_aggregate(
      ups, {RuleKind::FilteredTwinValidated, 0, 3.0}, prev, &validator);
  CHECK(out.fallback_used);
  CHECK(out.params.values == prev.values);
}

TEST_CASE("local training: zero episodes leave parameters unchanged") {
  learn::DqnHyper hyper;
  hyper.hidden = {8};
  AgentSlot slot;
  slot.id = 0;
  slot.agent = std::make_unique<learn::DqnAgent>(5, 5, hyper, 42);
  const learn::ParamVector before = slot.agent->params();
  const ModelUpdate u = local_train(slot, 0, drive::DriveConfig{},
                                    drive::ScenarioRanges{}, 0, 1);
  CHECK(u.params.values == before.values);
}

TEST_CASE("local training is deterministic given seeds") {
  learn::DqnHyper hyper;
  hyper.hidden = {8, 8};
  hyper.batch_size = 16;
  hyper.eps.decay_steps = 500;
  auto run_once = [&] {
    AgentSlot slot;
    slot.id = 3;
    slot.agent = std::make_unique<learn::DqnAgent>(5, 5, hyper, 42);
    const ModelUpdate u = local_train(slot, 3, drive::DriveConfig{},
                                      drive::ScenarioRanges{}, 1, 99);
    return u.params.values;
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("a locally trained agent drives cruise scenarios safely") {
  // Train-then-evaluate oracle on the easiest profile; verifies the task is
  // learnable before the federated machinery builds on it.
  learn::DqnHyper hyper;
  hyper.hidden = {32, 32};
  hyper.batch_size = 32;
  hyper.train_every = 4;
  hyper.lr = 5e-4;
  hyper.eps.decay_steps = 15000;
  AgentSlot slot;
  slot.id = 0;
  slot.mix = {1.0, 0.0, 0.0};  // cruise only
  slot.agent = std::make_unique<learn::DqnAgent>(5, 5, hyper, 7);

  drive::ScenarioRanges ranges;
  ranges.horizon = 150;
  local_train(slot, 200, drive::DriveConfig{}, ranges, 0, 11);

  Rng eval_rng(123);
  drive::ProfileMix cruise_only{1.0, 0.0, 0.0};
  const auto eval = drive::generate_drive_scenarios(100, cruise_only, ranges, eval_rng);
  const auto results = evaluate_policy(slot.agent->params(), eval, drive::DriveConfig{});
  CHECK(drive::no_collision_rate(results) == doctest::Approx(1.0));
}

TEST_CASE("run_frl smoke: mean with f=0 matches trimmed_mean(0) bitwise") {
  FrlConfig cfg;
  cfg.agents = 3;
  cfg.adversary_fraction = 0.0;
  cfg.rounds = 2;
  cfg.episodes_per_round = 2;
  cfg.eval_scenarios = 20;
  cfg.probe_size = 5;
  cfg.hyper.hidden = {8};
  cfg.hyper.batch_size = 8;
  cfg.ranges.horizon = 60;
  cfg.seed = 21;

  cfg.rule = {RuleKind::Mean, 0.0, 0.0};
  const FrlReport mean_report = run_frl(cfg);
  cfg.rule = {RuleKind::TrimmedMean, 0.0, 0.0};
  const FrlReport trimmed_report = run_frl(cfg);

  REQUIRE(mean_report.rounds.size() == trimmed_report.rounds.size());
  CHECK(mean_report.global.values == trimmed_report.global.values);
  for (std::size_t r = 0; r < mean_report.rounds.size(); ++r) {
    CHECK(mean_report.rounds[r].no_collision_rate ==
          trimmed_report.rounds[r].no_collision_rate);
    CHECK(mean_report.rounds[r].no_collision_rate >= 0.0);
    CHECK(mean_report.rounds[r].no_collision_rate <= 1.0);
  }
}

TEST_CASE("run_frl rejects inconsistent adversary fractions") {
  FrlConfig cfg;
  cfg.agents = 4;
  cfg.adversary_fraction = 0.5;  // not < 0.5
  CHECK_THROWS_AS(run_frl(cfg), InvalidArgument);
}
