#include "dnt/securefrl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dnt/csvio.hpp"
#include "dnt/error.hpp"

namespace dnt::frl {

const char* attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::SignFlip: return "sign_flip";
    case AttackKind::GaussianNoise: return "gaussian_noise";
    case AttackKind::ScaledUpdate: return "scaled_update";
    case AttackKind::ZeroUpdate: return "zero_update";
  }
  return "unknown";
}

AttackKind attack_from_name(const std::string& name) {
  if (name == "none") return AttackKind::None;
  if (name == "sign_flip") return AttackKind::SignFlip;
  if (name == "gaussian_noise") return AttackKind::GaussianNoise;
  if (name == "scaled_update") return AttackKind::ScaledUpdate;
  if (name == "zero_update") return AttackKind::ZeroUpdate;
  throw InvalidArgument("unknown attack: " + name);
}

const char* rule_name(RuleKind k) {
  switch (k) {
    case RuleKind::Mean: return "mean";
    case RuleKind::CoordinateMedian: return "coordinate_median";
    case RuleKind::TrimmedMean: return "trimmed_mean";
    case RuleKind::DistanceFilter: return "distance_filter";
    case RuleKind::FilteredTwinValidated: return "filtered_twin_validated";
  }
  return "unknown";
}

RuleKind rule_from_name(const std::string& name) {
  if (name == "mean") return RuleKind::Mean;
  if (name == "coordinate_median") return RuleKind::CoordinateMedian;
  if (name == "trimmed_mean") return RuleKind::TrimmedMean;
  if (name == "distance_filter") return RuleKind::DistanceFilter;
  if (name == "filtered_twin_validated") return RuleKind::FilteredTwinValidated;
  throw InvalidArgument("unknown aggregation rule: " + name);
}

fed::ModelUpdate apply_attack(const fed::ModelUpdate& update,
                              const AttackSpec& spec, Rng& rng) {
  fed::ModelUpdate out = update;
  switch (spec.kind) {
    case AttackKind::None:
      break;
    case AttackKind::SignFlip:
      for (float& v : out.params.values) v = -v;
      break;
    case AttackKind::GaussianNoise:
      if (spec.sigma < 0.0) throw InvalidArgument("apply_attack: sigma must be >= 0");
      for (float& v : out.params.values)
        v += static_cast<float>(rng.normal(0.0, spec.sigma));
      break;
    case AttackKind::ScaledUpdate:
      for (float& v : out.params.values) v *= static_cast<float>(spec.factor);
      break;
    case AttackKind::ZeroUpdate:
      for (float& v : out.params.values) v = 0.0f;
      break;
  }
  return out;
}

namespace {

std::vector<float> coordinate_median_values(
    std::span<const fed::ModelUpdate> updates) {
  const std::size_t dim = updates[0].params.values.size();
  std::vector<float> median(dim);
  std::vector<float> column(updates.size());
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t u = 0; u < updates.size(); ++u) {
      const float v = updates[u].params.values[i];
      // NaNs from diverged adversarial training would break the sort order;
      // treat them as +inf so the honest majority still wins.
      column[u] = std::isnan(v) ? std::numeric_limits<float>::infinity() : v;
    }
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    median[i] = (n % 2 == 1) ? column[n / 2]
                             : 0.5f * (column[n / 2 - 1] + column[n / 2]);
  }
  return median;
}

std::vector<float> unweighted_mean(std::span<const fed::ModelUpdate> updates,
                                   std::span<const std::size_t> which) {
  const std::size_t dim = updates[0].params.values.size();
  std::vector<double> acc(dim, 0.0);
  for (std::size_t idx : which)
    for (std::size_t i = 0; i < dim; ++i)
      acc[i] += static_cast<double>(updates[idx].params.values[i]);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i)
    out[i] = static_cast<float>(acc[i] / static_cast<double>(which.size()));
  return out;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Indices surviving the distance-to-median filter. At least the median-
/// closest update always survives, so the result is never empty.
std::vector<std::size_t> distance_filter_survivors(
    std::span<const fed::ModelUpdate> updates, double k) {
  const std::vector<float> center = coordinate_median_values(updates);
  std::vector<double> dist(updates.size(), 0.0);
  for (std::size_t u = 0; u < updates.size(); ++u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) {
      const double d = static_cast<double>(updates[u].params.values[i]) -
                       static_cast<double>(center[i]);
      acc += d * d;
    }
    dist[u] = std::sqrt(acc);
    if (std::isnan(dist[u])) dist[u] = std::numeric_limits<double>::infinity();
  }
  const double med = median_of(dist);
  std::vector<double> dev(updates.size());
  for (std::size_t u = 0; u < updates.size(); ++u) dev[u] = std::abs(dist[u] - med);
  const double mad = median_of(dev);
  const double threshold = med + k * mad;
  std::vector<std::size_t> keep;
  for (std::size_t u = 0; u < updates.size(); ++u)
    if (dist[u] <= threshold) keep.push_back(u);
  return keep;
}

// Canonical client-id order so every rule is permutation-invariant.
std::vector<fed::ModelUpdate> sorted_updates(std::span<const fed::ModelUpdate> in) {
  std::vector<fed::ModelUpdate> v(in.begin(), in.end());
  std::sort(v.begin(), v.end(),
            [](const fed::ModelUpdate& a, const fed::ModelUpdate& b) {
              return a.client_id < b.client_id;
            });
  return v;
}

}  // namespace

TwinValidator::TwinValidator(std::vector<drive::DriveScenario> probes,
                             drive::DriveConfig env)
    : probes_(std::move(probes)), env_(env) {}

bool TwinValidator::accepts(const learn::ParamVector& params) const {
  const auto results = evaluate_policy(params, probes_, env_);
  for (const drive::EpisodeResult& r : results)
    if (r.collided) return false;
  return true;
}

AggregateOutcome robust_aggregate(std::span<const fed::ModelUpdate> raw,
                                  const RobustRule& rule,
                                  const learn::ParamVector& prev_global,
                                  const TwinValidator* validator) {
  if (raw.empty()) throw InvalidArgument("robust_aggregate: no updates");
  const std::vector<fed::ModelUpdate> updates = sorted_updates(raw);
  for (const fed::ModelUpdate& u : updates)
    if (!u.params.same_shape(updates[0].params))
      throw InvalidArgument("robust_aggregate: update shape mismatch");

  AggregateOutcome out;
  out.params.manifest = updates[0].params.manifest;
  const std::size_t n = updates.size();
  const std::size_t dim = updates[0].params.values.size();

  switch (rule.kind) {
    case RuleKind::Mean: {
      // Sample-count-weighted average, the plain FL baseline. Equal counts
      // reduce to the unweighted mean (bitwise equal to trimmed_mean(0)).
      bool uniform = true;
      for (const fed::ModelUpdate& u : updates)
        uniform = uniform && u.sample_count == updates[0].sample_count;
      std::vector<double> acc(dim, 0.0);
      double total = 0.0;
      for (const fed::ModelUpdate& u : updates) {
        const double w =
            uniform ? 1.0
                    : static_cast<double>(std::max<std::int64_t>(1, u.sample_count));
        for (std::size_t i = 0; i < dim; ++i)
          acc[i] += w * static_cast<double>(u.params.values[i]);
        total += w;
      }
      out.params.values.resize(dim);
      for (std::size_t i = 0; i < dim; ++i)
        out.params.values[i] = static_cast<float>(acc[i] / total);
      for (const fed::ModelUpdate& u : updates) out.survivors.push_back(u.client_id);
      break;
    }
    case RuleKind::CoordinateMedian: {
      out.params.values = coordinate_median_values(updates);
      for (const fed::ModelUpdate& u : updates) out.survivors.push_back(u.client_id);
      break;
    }
    case RuleKind::TrimmedMean: {
      if (rule.beta < 0.0 || rule.beta >= 0.5)
        throw InvalidArgument("robust_aggregate: beta must be in [0, 0.5)");
      const std::size_t t = static_cast<std::size_t>(
          std::ceil(rule.beta * static_cast<double>(n)));
      if (n <= 2 * t)
        throw InvalidArgument("robust_aggregate: trimmed_mean needs n > 2*ceil(beta*n)");
      out.params.values.resize(dim);
      std::vector<float> column(n);
      for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t u = 0; u < n; ++u) column[u] = updates[u].params.values[i];
        std::sort(column.begin(), column.end());
        double acc = 0.0;
        for (std::size_t u = t; u < n - t; ++u) acc += static_cast<double>(column[u]);
        out.params.values[i] =
            static_cast<float>(acc / static_cast<double>(n - 2 * t));
      }
      for (const fed::ModelUpdate& u : updates) out.survivors.push_back(u.client_id);
      break;
    }
    case RuleKind::DistanceFilter:
    case RuleKind::FilteredTwinValidated: {
      const std::vector<std::size_t> keep = distance_filter_survivors(updates, rule.k);
      out.params.values = unweighted_mean(updates, keep);
      for (std::size_t idx : keep) out.survivors.push_back(updates[idx].client_id);
      if (rule.kind == RuleKind::FilteredTwinValidated && validator != nullptr &&
          !validator->accepts(out.params)) {
        out.params = prev_global;
        out.fallback_used = true;
      }
      break;
    }
  }
  return out;
}

std::vector<drive::DriveScenario> twin_probe_set(const drive::ScenarioRanges& ranges,
                                                 int size, std::uint64_t seed) {
  if (size < 1) throw InvalidArgument("twin_probe_set: size must be >= 1");
  drive::ProfileMix mix;
  mix.cruise = 0.25;
  mix.stop_and_go = 0.25;
  mix.hard_brake = 0.5;
  Rng rng(derive_seed(seed, "twin-probe"));
  return drive::generate_drive_scenarios(size, mix, ranges, rng);
}

fed::ModelUpdate local_train(AgentSlot& slot, int episodes,
                             const drive::DriveConfig& env_config,
                             const drive::ScenarioRanges& ranges, int round,
                             std::uint64_t seed) {
  drive::DriveEnv env(env_config);
  Rng scenario_rng(derive_seed(seed, "frl-scenarios",
                               static_cast<std::uint64_t>(slot.id) * 1000003u +
                                   static_cast<std::uint64_t>(round)));
  for (int ep = 0; ep < episodes; ++ep) {
    const auto batch = drive::generate_drive_scenarios(1, slot.mix, ranges, scenario_rng);
    env.reset(batch[0]);
    std::array<float, 5> obs = env.observe();
    while (!env.done()) {
      const int a = slot.agent->act(obs);
      const drive::DriveStep s = env.step(a);
      const std::array<float, 5> obs2 = env.observe();
      learn::Transition t;
      t.s.assign(obs.begin(), obs.end());
      t.a = a;
      t.r = static_cast<float>(s.reward);
      t.s2.assign(obs2.begin(), obs2.end());
      t.done = s.done;
      slot.agent->remember(std::move(t));
      slot.agent->step_and_maybe_train();
      obs = obs2;
    }
  }
  fed::ModelUpdate u;
  u.params = slot.agent->params();
  u.client_id = slot.id;
  u.round_produced = round;
  u.sample_count = std::max(1, episodes);
  return u;
}

std::vector<drive::EpisodeResult> evaluate_policy(
    const learn::ParamVector& params, std::span<const drive::DriveScenario> set,
    const drive::DriveConfig& env_config) {
  const learn::Mlp<float> net = learn::Mlp<float>::from_param_vector(params);
  drive::DriveEnv env(env_config);
  std::vector<drive::EpisodeResult> results;
  results.reserve(set.size());
  for (const drive::DriveScenario& sc : set) {
    env.reset(sc);
    drive::EpisodeResult r;
    r.scenario_seed = sc.seed;
    r.profile = sc.profile;
    while (!env.done()) {
      const std::array<float, 5> obs = env.observe();
      const std::vector<float> q = net.forward(std::span<const float>(obs));
      const drive::DriveStep s = env.step(learn::argmax_action(q));
      r.reward += s.reward;
      r.steps += 1;
      if (s.collided) r.collided = true;
    }
    results.push_back(r);
  }
  return results;
}

FrlReport run_frl(const FrlConfig& config) {
  if (config.rounds < 1) throw InvalidArgument("run_frl: rounds must be >= 1");
  const int n_adv = static_cast<int>(
      std::llround(config.adversary_fraction * config.agents));
  if (n_adv < 0 || n_adv * 2 >= config.agents + 1)
    throw InvalidArgument("run_frl: adversarial fraction must keep f < 0.5");

  // Heterogeneous local data: each agent leans toward a different profile.
  std::vector<AgentSlot> slots(static_cast<std::size_t>(config.agents));
  for (int i = 0; i < config.agents; ++i) {
    AgentSlot& s = slots[static_cast<std::size_t>(i)];
    s.id = i;
    switch (i % 3) {
      case 0: s.mix = {0.6, 0.2, 0.2}; break;
      case 1: s.mix = {0.2, 0.6, 0.2}; break;
      default: s.mix = {0.2, 0.2, 0.6}; break;
    }
    s.agent = std::make_unique<learn::DqnAgent>(
        5, static_cast<int>(drive::kActions.size()), config.hyper,
        derive_seed(config.seed, "frl-agent", static_cast<std::uint64_t>(i)));
  }
  // Deterministic role shuffle so adversaries are not always the first ids.
  {
    std::vector<int> ids(static_cast<std::size_t>(config.agents));
    for (int i = 0; i < config.agents; ++i) ids[static_cast<std::size_t>(i)] = i;
    Rng role_rng(derive_seed(config.seed, "frl-roles"));
    role_rng.shuffle(ids);
    for (int a = 0; a < n_adv; ++a)
      slots[static_cast<std::size_t>(ids[static_cast<std::size_t>(a)])].adversarial = true;
  }

  // Shared initial global model so parameter averaging is meaningful.
  learn::ParamVector global = slots[0].agent->params();
  for (auto& s : slots) s.agent->load_params(global);

  const auto eval_set = [&] {
    drive::ProfileMix mix;
    const double hb = config.eval_hard_brake_weight;
    mix.cruise = (1.0 - hb) / 2.0;
    mix.stop_and_go = (1.0 - hb) / 2.0;
    mix.hard_brake = hb;
    Rng rng(derive_seed(config.seed, "frl-eval"));
    return drive::generate_drive_scenarios(config.eval_scenarios, mix,
                                           config.ranges, rng);
  }();

  TwinValidator validator(
      twin_probe_set(config.ranges, config.probe_size, config.seed), config.env);

  FrlReport report;
  for (int round = 0; round < config.rounds; ++round) {
    std::vector<fed::ModelUpdate> updates;
    updates.reserve(slots.size());
    for (AgentSlot& slot : slots) {
      slot.agent->load_params(global);
      fed::ModelUpdate u = local_train(slot, config.episodes_per_round,
                                       config.env, config.ranges, round,
                                       config.seed);
      if (slot.adversarial && config.attack.kind != AttackKind::None) {
        Rng attack_rng(derive_seed(config.seed, "frl-attack",
                                   static_cast<std::uint64_t>(slot.id) * 1000003u +
                                       static_cast<std::uint64_t>(round)));
        u = apply_attack(u, config.attack, attack_rng);
      }
      updates.push_back(std::move(u));
    }
    const AggregateOutcome agg = robust_aggregate(
        updates, config.rule, global,
        config.rule.kind == RuleKind::FilteredTwinValidated ? &validator : nullptr);
    global = agg.params;

    const auto results = evaluate_policy(global, eval_set, config.env);
    FrlRoundRow row;
    row.round = round;
    row.no_collision_rate = drive::no_collision_rate(results);
    row.fallback_used = agg.fallback_used;
    row.survivors = static_cast<int>(agg.survivors.size());
    report.rounds.push_back(row);
  }
  report.final_no_collision_rate = report.rounds.back().no_collision_rate;
  report.global = global;
  return report;
}

void write_frl_rounds_csv(const std::string& path,
                          std::span<const FrlRoundRow> rows) {
  csv::Writer w(path, {"round", "no_collision_rate", "fallback", "survivors"});
  for (const FrlRoundRow& r : rows)
    w.row(r.round, r.no_collision_rate, r.fallback_used, r.survivors);
}

}  // namespace dnt::frl
