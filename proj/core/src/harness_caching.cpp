#include "dnt/harness/caching.hpp"

#include <algorithm>
#include <deque>

#include "dnt/error.hpp"
#include "dnt/learncore/dqn.hpp"
#include "dnt/safety.hpp"
#include "dnt/twin.hpp"

namespace dnt::harness {

namespace {

double saturate_count(double f) { return f / (f + 50.0); }

}  // namespace

std::vector<float> agent_features(const cache::EnvObservation& obs,
                                  const CachingConfig& config) {
  const double sentinel = config.cache_config().recency_sentinel();
  std::vector<float> f;
  f.reserve(static_cast<std::size_t>(obs.num_bs) + 4 +
            obs.cand_recency.size() * 2 + obs.forecast.size() +
            obs.loads.size() + obs.risky.size());
  for (int b = 0; b < obs.num_bs; ++b)
    f.push_back(b == obs.bs_id ? 1.0f : 0.0f);
  f.push_back(static_cast<float>(obs.client_id) /
              static_cast<float>(std::max(1, config.num_clients)));
  f.push_back(obs.req_cached ? 1.0f : 0.0f);
  f.push_back(static_cast<float>(obs.req_recency / sentinel));
  f.push_back(static_cast<float>(saturate_count(obs.req_frequency)));
  for (double r : obs.cand_recency) f.push_back(static_cast<float>(r / sentinel));
  for (double c : obs.cand_freq) f.push_back(static_cast<float>(saturate_count(c)));
  for (double v : obs.forecast) f.push_back(static_cast<float>(v));
  for (double v : obs.loads) f.push_back(static_cast<float>(v));
  for (double v : obs.risky) f.push_back(static_cast<float>(v));
  return f;
}

CachingResult run_caching(const CachingConfig& config, std::uint64_t seed,
                          const net::RequestTrace* replay_trace) {
  const cache::CacheConfig env_config = config.cache_config();

  // Independent seed streams; adding consumers to one never shifts another.
  Rng trace_rng = child_rng(seed, "trace");
  Rng history_rng = child_rng(seed, "history");
  Rng twin_train_rng = child_rng(seed, "twin-train");

  // Workload.
  net::RequestTrace trace;
  if (replay_trace != nullptr) {
    trace = *replay_trace;
  } else {
    trace = net::generate_trace(config.trace_config(), trace_rng);
  }
  if (trace.empty()) throw InvalidArgument("run_caching: empty trace");

  // Twin: forecaster pre-trained on a history trace from the same workload
  // distribution, then kept fixed during the evaluation episode.
  twin::Forecaster forecaster;
  twin::NetworkTwin net_twin(config.num_bs, config.catalog_size, config.sync_deadline);
  std::deque<std::int32_t> recent;
  double forecaster_ce = 0.0;
  if (config.twin_enabled) {
    net::TraceConfig hist_cfg = config.trace_config();
    hist_cfg.ticks = config.history_ticks;
    const net::RequestTrace history = net::generate_trace(hist_cfg, history_rng);
    std::vector<std::int32_t> ids(history.size());
    for (std::size_t i = 0; i < history.size(); ++i) ids[i] = history[i].content_id;
    forecaster = twin::Forecaster(config.catalog_size, config.forecaster.emb_dim,
                                  config.forecaster.hidden, config.forecaster.window,
                                  derive_seed(seed, "twin-init"));
    forecaster_ce =
        forecaster.train(ids, config.forecaster.epochs, config.forecaster.lr,
                         twin_train_rng);
    // Seed the live window with the tail of the history.
    const int w = config.forecaster.window;
    for (std::size_t i = ids.size() - static_cast<std::size_t>(w); i < ids.size(); ++i)
      recent.push_back(ids[i]);
  }

  cache::CacheEnv env(env_config, std::move(trace));
  env.reset();

  // Observation dimensionality is fixed per configuration.
  const int obs_dim = config.num_bs + 4 + 2 * config.candidates +
                      (config.twin_enabled ? 3 : 0) +
                      (config.interventions.state_enabled ? 2 * config.num_bs : 0);
  const int num_actions = 1 + config.candidates;  // reject | accept candidate i
  learn::DqnAgent agent(obs_dim, num_actions, config.agent,
                        derive_seed(seed, "agent"));

  const double load_increment =
      config.work_install / (config.load_window * config.service_capacity);

  safety::InterventionLog intervention_log;
  std::vector<cache::EpisodeRow> log;
  log.reserve(env.trace().size());

  auto build_observation = [&]() {
    cache::EnvObservation obs = env.observe();
    if (config.twin_enabled) {
      const std::vector<std::int32_t> window(recent.begin(), recent.end());
      const std::vector<float> probs = forecaster.forecast(window);
      const auto top = std::max_element(probs.begin(), probs.end());
      const int top1 = static_cast<int>(top - probs.begin());
      const double p_req =
          static_cast<double>(probs[static_cast<std::size_t>(obs.requested_item)]);
      obs.forecast = {static_cast<double>(top1) / config.catalog_size,
                      static_cast<double>(*top),
                      std::min(1.0, p_req * config.catalog_size / 25.0)};
    }
    if (config.interventions.state_enabled) {
      const std::vector<double> loads =
          config.twin_enabled ? net_twin.loads() : env.current_loads();
      obs = safety::intervene_state(std::move(obs), loads,
                                    config.reward.overload_threshold,
                                    config.interventions);
    }
    return obs;
  };

  cache::EnvObservation obs = build_observation();
  std::vector<float> feat = agent_features(obs, config);

  while (!env.done()) {
    const net::Request req = env.current_request();
    const int action_idx = agent.act(feat);

    cache::CacheAction proposed;
    if (action_idx == 0) {
      proposed = cache::CacheAction::reject();
    } else {
      const std::size_t cand = static_cast<std::size_t>(action_idx - 1);
      proposed = cache::CacheAction::accept_into(obs.candidate_slots[cand]);
    }

    // Risk check and override. The verdict source is the twin when enabled,
    // the live network otherwise.
    twin::RiskVerdict verdict;
    if (config.interventions.action_enabled) {
      if (config.twin_enabled) {
        verdict = net_twin.risk_verdict(req.bs_id, proposed,
                                        config.reward.overload_threshold,
                                        load_increment, req.time);
      } else {
        verdict = twin::assess_overload(env.current_loads(), req.bs_id, proposed,
                                        config.reward.overload_threshold,
                                        load_increment);
      }
    }
    const safety::ActionDecision decision =
        safety::intervene_action(proposed, verdict, obs, config.interventions);
    intervention_log.record(decision.intervened);
    // The agent trains on the executed action (off-policy override).
    int executed_idx = action_idx;
    if (decision.intervened) {
      executed_idx = 0;
      if (decision.final.accept) {
        const auto it = std::find(obs.candidate_slots.begin(),
                                  obs.candidate_slots.end(),
                                  decision.final.slot.value_or(-1));
        if (it != obs.candidate_slots.end())
          executed_idx = 1 + static_cast<int>(it - obs.candidate_slots.begin());
      }
    }

    const cache::StepResult step = env.step(decision.final);
    const std::vector<double> loads = env.current_loads();
    double reward = step.reward;
    if (config.interventions.reward_enabled)
      reward = safety::intervene_reward(reward, loads,
                                        config.interventions.imbalance_lambda);

    if (config.twin_enabled) {
      net_twin.sync(twin::snapshot_of(env), env.state().tick);
      recent.push_back(req.content_id);
      while (static_cast<int>(recent.size()) > config.forecaster.window)
        recent.pop_front();
    }

    const bool episode_done = env.done();
    cache::EnvObservation next_obs;
    std::vector<float> next_feat;
    if (!episode_done) {
      next_obs = build_observation();
      next_feat = agent_features(next_obs, config);
    } else {
      next_feat.assign(feat.size(), 0.0f);
    }

    learn::Transition t;
    t.s = feat;
    t.a = executed_idx;
    t.r = static_cast<float>(reward);
    t.s2 = next_feat;
    t.done = episode_done;
    agent.remember(std::move(t));
    agent.step_and_maybe_train();

    const auto [mn, mx] = std::minmax_element(loads.begin(), loads.end());
    log.push_back({req.time, req.bs_id, step.info.hit, reward,
                   decision.intervened, *mx, *mn});

    if (!episode_done) {
      obs = std::move(next_obs);
      feat = std::move(next_feat);
    }
  }

  CachingResult result;
  result.metrics = cache::episode_metrics(log);
  result.metrics.intervention_rate = intervention_log.rate();
  result.log = std::move(log);
  result.forecaster_final_ce = forecaster_ce;
  return result;
}

}  // namespace dnt::harness
