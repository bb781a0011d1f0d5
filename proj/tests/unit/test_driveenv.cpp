#include "doctest.h"

#include <cmath>
#include <vector>

#include "dnt/driveenv.hpp"
#include "dnt/error.hpp"
#include "dnt/rng.hpp"

using namespace dnt;
using namespace dnt::drive;

namespace {

DriveScenario cruise_scenario(double speed = 25.0, double gap_front = 40.0,
                              double gap_rear = 50.0, int horizon = 100) {
  DriveScenario sc;
  sc.profile = LeaderProfile::Cruise;
  sc.initial_speed = speed;
  sc.gap_front = gap_front;
  sc.gap_rear = gap_rear;
  sc.horizon = horizon;
  return sc;
}

constexpr int kCoast = 2;  // action index for zero acceleration

}  // namespace

TEST_CASE("reset builds the platoon from gaps and speeds") {
  DriveEnv env;
  const PlatoonState s = env.reset(cruise_scenario(25.0, 30.0, 30.0));
  CHECK(s.follower.pos == 0.0);
  CHECK(s.ego.pos == doctest::Approx(35.0));    // rear gap + length
  CHECK(s.leader.pos == doctest::Approx(70.0)); // + front gap + length
  CHECK(s.gap_front() == doctest::Approx(30.0));
  CHECK(s.gap_rear() == doctest::Approx(30.0));
  CHECK(s.leader.vel == 25.0);
  CHECK(s.ego.vel == 25.0);
  CHECK(s.follower.vel == 25.0);

  const PlatoonState again = env.reset(cruise_scenario(25.0, 30.0, 30.0));
  CHECK(again.ego.pos == s.ego.pos);

  DriveScenario bad = cruise_scenario();
  bad.gap_front = 0.0;
  CHECK_THROWS_AS(env.reset(bad), InvalidArgument);
}

TEST_CASE("hard-brake profiles schedule the braking event inside the horizon") {
  Rng rng(5);
  ProfileMix mix;
  mix.cruise = 0.0;
  mix.stop_and_go = 0.0;
  mix.hard_brake = 1.0;
  const auto scenarios = generate_drive_scenarios(10, mix, ScenarioRanges{}, rng);
  for (const DriveScenario& sc : scenarios) {
    CHECK(sc.profile == LeaderProfile::HardBrake);
    CHECK(sc.brake_tick >= 0);
    CHECK(sc.brake_tick < sc.horizon);
  }
}

TEST_CASE("kinematics: one zero-acceleration step moves x by v dt") {
  DriveEnv env;
  env.reset(cruise_scenario(10.0, 50.0, 50.0));
  const double x0 = env.state().ego.pos;
  env.step(kCoast);
  CHECK(env.state().ego.vel == doctest::Approx(10.0));
  CHECK(env.state().ego.pos - x0 == doctest::Approx(1.0));
}

TEST_CASE("semi-implicit update is exact: dx equals v_new * dt") {
  DriveEnv env;
  env.reset(cruise_scenario(20.0, 60.0, 60.0));
  for (int a = 0; a < static_cast<int>(kActions.size()); ++a) {
    const double x0 = env.state().ego.pos;
    const double v0 = env.state().ego.vel;
    env.step(a);
    const double v1 = env.state().ego.vel;
    const double dx = env.state().ego.pos - x0;
    CHECK(dx == v1 * env.config().dt);  // exact algebra, no tolerance
    CHECK(v1 <= env.config().v_max);
    CHECK(v1 >= 0.0);
    (void)v0;
    if (env.done()) break;
  }
}

TEST_CASE("closing in on the leader eventually collides") {
  DriveEnv env;
  env.reset(cruise_scenario(25.0, 5.0, 80.0, 400));
  bool collided = false;
  while (!env.done()) {
    const DriveStep out = env.step(4);  // +2 accelerate into the leader
    if (out.collided) {
      collided = true;
      CHECK(out.reward == doctest::Approx(-100.0));
    }
  }
  CHECK(collided);
  CHECK(env.state().gap_front() <= 0.0);
}

TEST_CASE("equal speeds with zero acceleration never collide") {
  DriveEnv env;
  env.reset(cruise_scenario(25.0, 40.0, 50.0, 300));
  while (!env.done()) {
    const DriveStep out = env.step(kCoast);
    CHECK_FALSE(out.collided);
  }
  CHECK(env.state().gap_front() == doctest::Approx(40.0));
}

TEST_CASE("gap changes are bounded by v_max per step") {
  DriveEnv env;
  env.reset(cruise_scenario(30.0, 50.0, 60.0, 200));
  Rng rng(9);
  double prev_gap = env.state().gap_front();
  while (!env.done()) {
    env.step(static_cast<int>(rng.below(kActions.size())));
    const double gap = env.state().gap_front();
    CHECK(std::abs(gap - prev_gap) <=
          env.config().v_max * env.config().dt + 1e-9);
    prev_gap = gap;
  }
}

TEST_CASE("trajectories are a pure function of scenario and actions") {
  DriveEnv a, b;
  const DriveScenario sc = cruise_scenario(28.0, 45.0, 55.0, 150);
  a.reset(sc);
  b.reset(sc);
  Rng rng(31);
  std::vector<int> actions;
  for (int i = 0; i < 150; ++i)
    actions.push_back(static_cast<int>(rng.below(kActions.size())));
  for (int act : actions) {
    if (a.done()) break;
    a.step(act);
    b.step(act);
    CHECK(a.state().ego.pos == b.state().ego.pos);
    CHECK(a.state().leader.vel == b.state().leader.vel);
    CHECK(a.state().follower.pos == b.state().follower.pos);
  }
}

TEST_CASE("reward peaks at the target headway and accumulates per step") {
  DriveConfig cfg;
  DriveEnv env(cfg);
  // With matched speeds and zero acceleration the gap stays at 2 s headway.
  const double v = 20.0;
  env.reset(cruise_scenario(v, cfg.reward.headway_target * v, 60.0, 50));
  const DriveStep out = env.step(kCoast);
  CHECK(out.reward ==
        doctest::Approx(cfg.reward.alive + cfg.reward.headway_bonus));

  // A clean episode of H steps collects at least H of alive reward.
  DriveEnv env2(cfg);
  env2.reset(cruise_scenario(v, 45.0, 60.0, 80));
  double total = 0.0;
  int steps = 0;
  while (!env2.done()) {
    const DriveStep s = env2.step(kCoast);
    total += s.reward;
    ++steps;
    REQUIRE_FALSE(s.collided);
  }
  CHECK(steps == 80);
  CHECK(total >= 80.0);
}

TEST_CASE("invalid actions are rejected") {
  DriveEnv env;
  env.reset(cruise_scenario());
  CHECK_THROWS_AS(env.step(-1), InvalidArgument);
  CHECK_THROWS_AS(env.step(5), InvalidArgument);
}

TEST_CASE("scenario generation respects the profile mix within one") {
  Rng rng(12);
  ProfileMix mix;
  mix.cruise = 0.5;
  mix.stop_and_go = 0.3;
  mix.hard_brake = 0.2;
  const auto scenarios = generate_drive_scenarios(10, mix, ScenarioRanges{}, rng);
  int c = 0, s = 0, h = 0;
  for (const auto& sc : scenarios) {
    if (sc.profile == LeaderProfile::Cruise) ++c;
    if (sc.profile == LeaderProfile::StopAndGo) ++s;
    if (sc.profile == LeaderProfile::HardBrake) ++h;
  }
  CHECK(std::abs(c - 5) <= 1);
  CHECK(std::abs(s - 3) <= 1);
  CHECK(std::abs(h - 2) <= 1);
  CHECK_THROWS_AS(generate_drive_scenarios(0, mix, ScenarioRanges{}, rng),
                  InvalidArgument);
}

TEST_CASE("sampled gaps and speeds stay inside the configured ranges") {
  Rng rng(13);
  ScenarioRanges ranges;
  const auto scenarios =
      generate_drive_scenarios(500, ProfileMix{}, ranges, rng);
  double min_gap = 1e9, max_gap = -1e9;
  for (const auto& sc : scenarios) {
    CHECK(sc.initial_speed >= ranges.speed_min);
    CHECK(sc.initial_speed <= ranges.speed_max);
    CHECK(sc.gap_front >= ranges.gap_front_min);
    CHECK(sc.gap_front <= ranges.gap_front_max);
    const double headway = sc.gap_rear / sc.initial_speed;
    CHECK(headway >= ranges.rear_headway_min - 1e-9);
    CHECK(headway <= ranges.rear_headway_max + 1e-9);
    min_gap = std::min(min_gap, sc.gap_front);
    max_gap = std::max(max_gap, sc.gap_front);
  }
  // The sample actually spans the range rather than hugging one end.
  CHECK(min_gap < ranges.gap_front_min + 5.0);
  CHECK(max_gap > ranges.gap_front_max - 5.0);
}

TEST_CASE("no_collision_rate arithmetic") {
  std::vector<EpisodeResult> results(100);
  for (int i = 0; i < 100; ++i) results[static_cast<std::size_t>(i)].collided = i < 2;
  CHECK(no_collision_rate(results) == doctest::Approx(0.98));
  for (auto& r : results) r.collided = false;
  CHECK(no_collision_rate(results) == doctest::Approx(1.0));
  for (auto& r : results) r.collided = true;
  CHECK(no_collision_rate(results) == doctest::Approx(0.0));
  CHECK_THROWS_AS(no_collision_rate(std::vector<EpisodeResult>{}), InvalidArgument);
}

TEST_CASE("the scripted braking policy survives the default distribution") {
  Rng rng(2024);
  const auto scenarios =
      generate_drive_scenarios(300, ProfileMix{}, ScenarioRanges{}, rng);
  DriveEnv env;
  std::vector<EpisodeResult> results;
  for (const DriveScenario& sc : scenarios) {
    env.reset(sc);
    EpisodeResult r;
    r.profile = sc.profile;
    while (!env.done()) {
      const DriveStep out = env.step(scripted_safe_action(env.state(), env.config()));
      if (out.collided) r.collided = true;
    }
    results.push_back(r);
  }
  CHECK(no_collision_rate(results) == doctest::Approx(1.0));
}
