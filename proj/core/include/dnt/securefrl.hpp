#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dnt/driveenv.hpp"
#include "dnt/fedtwin.hpp"
#include "dnt/learncore/dqn.hpp"
#include "dnt/learncore/params.hpp"
#include "dnt/rng.hpp"

namespace dnt::frl {

enum class AttackKind { None, SignFlip, GaussianNoise, ScaledUpdate, ZeroUpdate };

struct AttackSpec {
  AttackKind kind = AttackKind::None;
  double sigma = 0.0;   // gaussian_noise
  double factor = 0.0;  // scaled_update
};

const char* attack_name(AttackKind k);
AttackKind attack_from_name(const std::string& name);

/// Poisons a model update in place of the honest one. Gaussian noise draws
/// from `rng`; the other attacks are deterministic transforms.
fed::ModelUpdate apply_attack(const fed::ModelUpdate& update,
                              const AttackSpec& spec, Rng& rng);

enum class RuleKind {
  Mean,
  CoordinateMedian,
  TrimmedMean,
  DistanceFilter,
  FilteredTwinValidated
};

struct RobustRule {
  RuleKind kind = RuleKind::Mean;
  double beta = 0.2;  // trimmed_mean
  double k = 3.0;     // distance_filter MAD multiplier
};

const char* rule_name(RuleKind k);
RuleKind rule_from_name(const std::string& name);

struct AggregateOutcome {
  learn::ParamVector params;
  bool fallback_used = false;
  std::vector<int> survivors;  // client ids that contributed
};

/// Validates a candidate aggregate by driving its greedy policy over a probe
/// scenario set; any collision rejects the aggregate.
class TwinValidator {
 public:
  TwinValidator(std::vector<drive::DriveScenario> probes, drive::DriveConfig env);
  bool accepts(const learn::ParamVector& params) const;
  std::size_t probe_count() const { return probes_.size(); }

 private:
  std::vector<drive::DriveScenario> probes_;
  drive::DriveConfig env_;
};

/// Applies the aggregation rule. `prev_global` is the fallback when twin
/// validation rejects the candidate (fallback_used is set).
AggregateOutcome robust_aggregate(std::span<const fed::ModelUpdate> updates,
                                  const RobustRule& rule,
                                  const learn::ParamVector& prev_global,
                                  const TwinValidator* validator = nullptr);

/// Probe scenarios for aggregate validation, weighted toward hard-brake
/// corner cases (>= 50%). Seeded and reproducible.
std::vector<drive::DriveScenario> twin_probe_set(const drive::ScenarioRanges& ranges,
                                                 int size, std::uint64_t seed);

/// One federated agent: local environment stream, persistent replay buffer
/// and exploration schedule, honest or adversarial role.
struct AgentSlot {
  int id = 0;
  bool adversarial = false;
  drive::ProfileMix mix;
  std::unique_ptr<learn::DqnAgent> agent;
};

struct FrlConfig {
  int agents = 10;
  double adversary_fraction = 0.2;
  AttackSpec attack;
  RobustRule rule;
  int rounds = 30;
  int episodes_per_round = 200;
  int eval_scenarios = 500;
  double eval_hard_brake_weight = 0.5;
  int probe_size = 40;
  learn::DqnHyper hyper;
  drive::DriveConfig env;
  drive::ScenarioRanges ranges;
  std::uint64_t seed = 1;
};

struct FrlRoundRow {
  int round = 0;
  double no_collision_rate = 0.0;
  bool fallback_used = false;
  int survivors = 0;
};

struct FrlReport {
  std::vector<FrlRoundRow> rounds;
  double final_no_collision_rate = 0.0;
  learn::ParamVector global;
};

/// Trains the slot's agent for `episodes` episodes on its scenario stream and
/// returns the post-training parameters as a ModelUpdate.
fed::ModelUpdate local_train(AgentSlot& slot, int episodes,
                             const drive::DriveConfig& env_config,
                             const drive::ScenarioRanges& ranges, int round,
                             std::uint64_t seed);

/// Evaluates a greedy policy over a fixed scenario set.
std::vector<drive::EpisodeResult> evaluate_policy(
    const learn::ParamVector& params, std::span<const drive::DriveScenario> set,
    const drive::DriveConfig& env_config);

FrlReport run_frl(const FrlConfig& config);

void write_frl_rounds_csv(const std::string& path,
                          std::span<const FrlRoundRow> rows);

}  // namespace dnt::frl
