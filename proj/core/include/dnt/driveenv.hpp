#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dnt/rng.hpp"

namespace dnt::drive {

struct VehicleState {
  double pos = 0.0;     // meters along the lane
  double vel = 0.0;     // m/s
  double length = 5.0;  // meters
};

struct PlatoonState {
  VehicleState leader, ego, follower;
  std::int64_t tick = 0;
  double elapsed = 0.0;  // seconds

  double gap_front() const { return leader.pos - ego.pos - leader.length; }
  double gap_rear() const { return ego.pos - follower.pos - ego.length; }
};

enum class LeaderProfile { Cruise, StopAndGo, HardBrake };

const char* profile_name(LeaderProfile p);
LeaderProfile profile_from_name(const std::string& name);

struct DriveScenario {
  std::uint64_t seed = 0;
  LeaderProfile profile = LeaderProfile::Cruise;
  double initial_speed = 25.0;  // all three vehicles start at this speed
  double gap_front = 40.0;      // leader-to-ego bumper gap, meters
  double gap_rear = 50.0;       // ego-to-follower bumper gap, meters
  int horizon = 200;            // steps
  // Profile internals, derived from the seed at generation time.
  int brake_tick = 60;          // hard-brake onset
  double brake_decel = 3.5;     // m/s^2, magnitude
  int stop_go_period = 80;      // ticks per accel/decel phase pair
};

/// Discrete longitudinal accelerations available to the ego agent, m/s^2.
inline constexpr std::array<double, 5> kActions{-4.0, -2.0, 0.0, 1.0, 2.0};

struct IdmParams {
  double headway = 2.0;     // desired time gap, s
  double accel_max = 1.5;   // m/s^2
  double decel_comf = 2.0;  // m/s^2
  double min_gap = 2.0;     // jam distance, m
  double decel_cap = 3.0;   // physical braking limit, m/s^2
};

struct DriveRewardSpec {
  double collision = -100.0;
  double alive = 1.0;
  double headway_bonus = 0.5;  // b
  double headway_target = 2.0;  // seconds of gap the bonus peaks at
  double g0 = 10.0;             // meters, bonus decay scale
};

struct DriveConfig {
  double dt = 0.1;
  double v_max = 35.0;
  double vehicle_length = 5.0;
  IdmParams idm;
  DriveRewardSpec reward;
};

/// IDM acceleration for the follower toward the vehicle ahead of it.
double idm_accel(double v, double v_ahead, double gap, double desired_speed,
                 const IdmParams& p);

struct DriveStep {
  double reward = 0.0;
  bool done = false;
  bool collided = false;
};

class DriveEnv {
 public:
  explicit DriveEnv(DriveConfig config = {});

  /// Deterministic initial platoon from the scenario. Throws on non-positive
  /// initial gaps.
  PlatoonState reset(const DriveScenario& scenario);

  /// Semi-implicit Euler step: v' = clamp(v + a dt), x' = x + v' dt.
  DriveStep step(int action_index);

  /// Normalized agent features: [ego speed, front gap, front closing speed,
  /// rear gap, rear closing speed].
  std::array<float, 5> observe() const;

  const PlatoonState& state() const { return state_; }
  const DriveConfig& config() const { return config_; }
  const DriveScenario& scenario() const { return scenario_; }
  bool done() const { return done_; }

  /// Leader acceleration prescribed by the active profile at `tick`.
  double leader_accel(std::int64_t tick, double leader_vel) const;

 private:
  DriveConfig config_;
  DriveScenario scenario_;
  PlatoonState state_;
  bool done_ = true;
};

/// Brake hard when the front gap falls under a speed-dependent margin,
/// otherwise hold speed. Safe by construction on the default scenario
/// distribution; used as the sanity oracle for trainability.
int scripted_safe_action(const PlatoonState& state, const DriveConfig& config);

struct ProfileMix {
  double cruise = 0.4;
  double stop_and_go = 0.3;
  double hard_brake = 0.3;
};

struct ScenarioRanges {
  double speed_min = 22.0, speed_max = 30.0;
  double gap_front_min = 30.0, gap_front_max = 60.0;
  double rear_headway_min = 1.9, rear_headway_max = 2.6;  // seconds
  int horizon = 200;
};

/// Seeded scenario batch; profile counts match the mix within +-1.
std::vector<DriveScenario> generate_drive_scenarios(int n, const ProfileMix& mix,
                                                    const ScenarioRanges& ranges,
                                                    Rng& rng);

struct EpisodeResult {
  std::uint64_t scenario_seed = 0;
  LeaderProfile profile = LeaderProfile::Cruise;
  bool collided = false;
  int steps = 0;
  double reward = 0.0;
};

/// Fraction of results without a collision. Throws on empty input.
double no_collision_rate(std::span<const EpisodeResult> results);

void write_results_csv(const std::string& path,
                       std::span<const EpisodeResult> results);

}  // namespace dnt::drive
