#include "dnt/driveenv.hpp"

#include <algorithm>
#include <cmath>

#include "dnt/csvio.hpp"
#include "dnt/error.hpp"

namespace dnt::drive {

const char* profile_name(LeaderProfile p) {
  switch (p) {
    case LeaderProfile::Cruise: return "cruise";
    case LeaderProfile::StopAndGo: return "stop_and_go";
    case LeaderProfile::HardBrake: return "hard_brake";
  }
  return "unknown";
}

LeaderProfile profile_from_name(const std::string& name) {
  if (name == "cruise") return LeaderProfile::Cruise;
  if (name == "stop_and_go") return LeaderProfile::StopAndGo;
  if (name == "hard_brake") return LeaderProfile::HardBrake;
  throw InvalidArgument("unknown leader profile: " + name);
}

double idm_accel(double v, double v_ahead, double gap, double desired_speed,
                 const IdmParams& p) {
  const double dv = v - v_ahead;
  const double s_star =
      p.min_gap + std::max(0.0, v * p.headway +
                                    v * dv / (2.0 * std::sqrt(p.accel_max * p.decel_comf)));
  const double s = std::max(gap, 0.1);
  double a = p.accel_max * (1.0 - std::pow(v / std::max(desired_speed, 0.1), 4.0) -
                            (s_star / s) * (s_star / s));
  return std::clamp(a, -p.decel_cap, p.accel_max);
}

DriveEnv::DriveEnv(DriveConfig config) : config_(config) {}

PlatoonState DriveEnv::reset(const DriveScenario& scenario) {
  if (scenario.gap_front <= 0.0 || scenario.gap_rear <= 0.0)
    throw InvalidArgument("DriveEnv::reset: initial gaps must be > 0");
  if (scenario.horizon < 1)
    throw InvalidArgument("DriveEnv::reset: horizon must be >= 1");
  scenario_ = scenario;
  const double len = config_.vehicle_length;
  state_ = PlatoonState{};
  state_.follower = {0.0, scenario.initial_speed, len};
  state_.ego = {scenario.gap_rear + len, scenario.initial_speed, len};
  state_.leader = {state_.ego.pos + scenario.gap_front + len, scenario.initial_speed, len};
  state_.tick = 0;
  state_.elapsed = 0.0;
  done_ = false;
  return state_;
}

double DriveEnv::leader_accel(std::int64_t tick, double leader_vel) const {
  switch (scenario_.profile) {
    case LeaderProfile::Cruise:
      return 0.0;
    case LeaderProfile::StopAndGo: {
      const int period = std::max(2, scenario_.stop_go_period);
      const int phase = static_cast<int>(tick % period);
      return phase < period / 2 ? -1.5 : 1.5;
    }
    case LeaderProfile::HardBrake: {
      if (tick < scenario_.brake_tick) return 0.0;
      if (leader_vel > 2.0) return -scenario_.brake_decel;
      // Creep back up once the braking event is over.
      if (tick > scenario_.brake_tick + 80 &&
          leader_vel < scenario_.initial_speed)
        return 1.5;
      return 0.0;
    }
  }
  return 0.0;
}

DriveStep DriveEnv::step(int action_index) {
  if (done_) throw Error("DriveEnv::step: episode finished");
  if (action_index < 0 || action_index >= static_cast<int>(kActions.size()))
    throw InvalidArgument("DriveEnv::step: invalid action index");

  const double dt = config_.dt;
  const double a_ego = kActions[static_cast<std::size_t>(action_index)];
  const double a_leader = leader_accel(state_.tick, state_.leader.vel);
  const double a_follower =
      idm_accel(state_.follower.vel, state_.ego.vel, state_.gap_rear(),
                scenario_.initial_speed, config_.idm);

  auto integrate = [&](VehicleState& v, double a) {
    v.vel = std::clamp(v.vel + a * dt, 0.0, config_.v_max);
    v.pos += v.vel * dt;
  };
  integrate(state_.leader, a_leader);
  integrate(state_.ego, a_ego);
  integrate(state_.follower, a_follower);
  state_.tick += 1;
  state_.elapsed += dt;

  const bool collided = state_.gap_front() <= 0.0 || state_.gap_rear() <= 0.0;

  DriveStep out;
  out.collided = collided;
  out.done = collided || state_.tick >= scenario_.horizon;
  if (collided) {
    out.reward = config_.reward.collision;
  } else {
    const double target = config_.reward.headway_target * state_.ego.vel;
    out.reward = config_.reward.alive +
                 config_.reward.headway_bonus *
                     std::exp(-std::abs(state_.gap_front() - target) / config_.reward.g0);
  }
  done_ = out.done;
  return out;
}

std::array<float, 5> DriveEnv::observe() const {
  const double vmax = config_.v_max;
  const double gap_cap = 200.0;
  return {static_cast<float>(state_.ego.vel / vmax),
          static_cast<float>(std::min(state_.gap_front(), gap_cap) / gap_cap),
          static_cast<float>((state_.ego.vel - state_.leader.vel) / vmax),
          static_cast<float>(std::min(state_.gap_rear(), gap_cap) / gap_cap),
          static_cast<float>((state_.follower.vel - state_.ego.vel) / vmax)};
}

int scripted_safe_action(const PlatoonState& state, const DriveConfig& config) {
  (void)config;
  const double v = state.ego.vel;
  const double gap = state.gap_front();
  const double closing = v - state.leader.vel;
  // Distance needed to bleed off the closing speed at moderate braking, plus
  // a speed-dependent margin.
  const double margin = 1.2 * v + 8.0;
  const double brake_dist =
      closing > 0.0 ? closing * closing / (2.0 * 2.0) + margin : margin;
  if (gap < 0.6 * margin) return 0;       // emergency: -4
  if (gap < brake_dist) return 1;         // comfort brake: -2
  if (gap > 2.0 * margin && v < state.leader.vel) return 4;  // close up: +2
  return 2;                               // hold speed
}

std::vector<DriveScenario> generate_drive_scenarios(int n, const ProfileMix& mix,
                                                    const ScenarioRanges& ranges,
                                                    Rng& rng) {
  if (n < 1) throw InvalidArgument("generate_drive_scenarios: n must be >= 1");
  const double total = mix.cruise + mix.stop_and_go + mix.hard_brake;
  if (total <= 0.0) throw InvalidArgument("generate_drive_scenarios: empty mix");

  // Largest-remainder apportionment keeps every profile within +-1 of its
  // exact share.
  const std::array<double, 3> shares{mix.cruise / total, mix.stop_and_go / total,
                                     mix.hard_brake / total};
  std::array<int, 3> counts{};
  std::array<double, 3> remainders{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = shares[static_cast<std::size_t>(i)] * n;
    counts[static_cast<std::size_t>(i)] = static_cast<int>(exact);
    remainders[static_cast<std::size_t>(i)] = exact - counts[static_cast<std::size_t>(i)];
    assigned += counts[static_cast<std::size_t>(i)];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (remainders[static_cast<std::size_t>(i)] > remainders[static_cast<std::size_t>(best)])
        best = i;
    counts[static_cast<std::size_t>(best)] += 1;
    remainders[static_cast<std::size_t>(best)] = -1.0;
    ++assigned;
  }

  std::vector<LeaderProfile> profiles;
  profiles.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < counts[0]; ++i) profiles.push_back(LeaderProfile::Cruise);
  for (int i = 0; i < counts[1]; ++i) profiles.push_back(LeaderProfile::StopAndGo);
  for (int i = 0; i < counts[2]; ++i) profiles.push_back(LeaderProfile::HardBrake);
  rng.shuffle(profiles);

  std::vector<DriveScenario> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    DriveScenario sc;
    sc.seed = rng.next_u64();
    sc.profile = profiles[static_cast<std::size_t>(i)];
    sc.initial_speed = rng.uniform(ranges.speed_min, ranges.speed_max);
    sc.gap_front = rng.uniform(ranges.gap_front_min, ranges.gap_front_max);
    sc.gap_rear = sc.initial_speed *
                  rng.uniform(ranges.rear_headway_min, ranges.rear_headway_max);
    sc.horizon = ranges.horizon;
    sc.brake_tick = 20 + static_cast<int>(rng.below(
                              static_cast<std::uint64_t>(ranges.horizon / 2)));
    sc.brake_decel = rng.uniform(2.5, 3.5);
    sc.stop_go_period = 60 + static_cast<int>(rng.below(60));
    out.push_back(sc);
  }
  return out;
}

double no_collision_rate(std::span<const EpisodeResult> results) {
  if (results.empty()) throw InvalidArgument("no_collision_rate: empty results");
  std::int64_t clean = 0;
  for (const EpisodeResult& r : results)
    if (!r.collided) ++clean;
  return static_cast<double>(clean) / static_cast<double>(results.size());
}

void write_results_csv(const std::string& path,
                       std::span<const EpisodeResult> results) {
  csv::Writer w(path, {"scenario_id", "profile", "collided", "steps", "reward"});
  for (const EpisodeResult& r : results)
    w.row(static_cast<std::int64_t>(r.scenario_seed), profile_name(r.profile),
          r.collided, r.steps, r.reward);
}

}  // namespace dnt::drive
