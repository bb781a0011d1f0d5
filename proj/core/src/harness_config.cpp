#include "dnt/harness/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "dnt/error.hpp"
#include "nlohmann/json.hpp"

namespace dnt::harness {

using nlohmann::json;

const char* pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::Caching: return "caching";
    case Pipeline::FedTwin: return "fedtwin";
    case Pipeline::Frl: return "frl";
  }
  return "unknown";
}

cache::CacheConfig CachingConfig::cache_config() const {
  cache::CacheConfig c;
  c.num_bs = num_bs;
  c.capacity = cache_capacity;
  c.catalog_size = catalog_size;
  c.num_clients = num_clients;
  c.candidates = candidates;
  c.reward = reward;
  c.load.work_hit = work_hit;
  c.load.work_install = work_install;
  c.load.work_origin = work_origin;
  c.load.window = load_window;
  c.load.capacity_per_tick = service_capacity;
  return c;
}

net::TraceConfig CachingConfig::trace_config() const {
  net::TraceConfig t;
  t.zipf = {zipf_exponent, catalog_size};
  t.num_clients = num_clients;
  t.num_bs = num_bs;
  t.requests_per_tick = requests_per_tick;
  t.ticks = ticks;
  t.client_skew = client_skew;
  return t;
}

namespace {

// --- strict parsing helpers -------------------------------------------------

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError(path + "." + key + ": unknown key");
}

template <typename T>
void get_to(const json& obj, const char* key, T& out, const std::string& path) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

void parse_agent(const json& j, learn::DqnHyper& h, const std::string& path) {
  check_keys(j, {"hidden", "gamma", "lr", "batch_size", "buffer_capacity",
                 "target_sync_every", "train_every", "eps_start", "eps_end",
                 "eps_decay_steps"},
             path);
  get_to(j, "hidden", h.hidden, path);
  get_to(j, "gamma", h.gamma, path);
  get_to(j, "lr", h.lr, path);
  get_to(j, "batch_size", h.batch_size, path);
  get_to(j, "buffer_capacity", h.buffer_capacity, path);
  get_to(j, "target_sync_every", h.target_sync_every, path);
  get_to(j, "train_every", h.train_every, path);
  get_to(j, "eps_start", h.eps.eps_start, path);
  get_to(j, "eps_end", h.eps.eps_end, path);
  get_to(j, "eps_decay_steps", h.eps.decay_steps, path);
  if (h.eps.eps_end < 0 || h.eps.eps_start > 1 || h.eps.eps_end > h.eps.eps_start)
    throw ConfigError(path + ": need 0 <= eps_end <= eps_start <= 1");
}

void parse_caching(const json& j, CachingConfig& c) {
  const std::string path = "caching";
  check_keys(j,
             {"catalog_size", "num_bs", "num_clients", "requests_per_tick",
              "ticks", "zipf_exponent", "client_skew", "cache_capacity",
              "candidates", "service_capacity", "load_window", "work_hit",
              "work_install", "work_origin", "reward", "agent", "twin",
              "interventions", "write_episode_log", "history_ticks"},
             path);
  get_to(j, "catalog_size", c.catalog_size, path);
  get_to(j, "num_bs", c.num_bs, path);
  get_to(j, "num_clients", c.num_clients, path);
  get_to(j, "requests_per_tick", c.requests_per_tick, path);
  get_to(j, "ticks", c.ticks, path);
  get_to(j, "zipf_exponent", c.zipf_exponent, path);
  get_to(j, "client_skew", c.client_skew, path);
  get_to(j, "cache_capacity", c.cache_capacity, path);
  get_to(j, "candidates", c.candidates, path);
  get_to(j, "service_capacity", c.service_capacity, path);
  get_to(j, "load_window", c.load_window, path);
  get_to(j, "work_hit", c.work_hit, path);
  get_to(j, "work_install", c.work_install, path);
  get_to(j, "work_origin", c.work_origin, path);
  get_to(j, "history_ticks", c.history_ticks, path);
  get_to(j, "write_episode_log", c.write_episode_log, path);
  if (j.contains("reward")) {
    const json& r = j.at("reward");
    check_keys(r, {"r_hit", "r_miss", "c_overload", "overload_threshold"},
               path + ".reward");
    get_to(r, "r_hit", c.reward.r_hit, path + ".reward");
    get_to(r, "r_miss", c.reward.r_miss, path + ".reward");
    get_to(r, "c_overload", c.reward.c_overload, path + ".reward");
    get_to(r, "overload_threshold", c.reward.overload_threshold, path + ".reward");
    if (c.reward.r_hit <= c.reward.r_miss)
      throw ConfigError(path + ".reward: r_hit must exceed r_miss");
    if (c.reward.c_overload < 0)
      throw ConfigError(path + ".reward: c_overload must be >= 0");
    if (c.reward.overload_threshold <= 0 || c.reward.overload_threshold > 1)
      throw ConfigError(path + ".reward: overload_threshold must be in (0, 1]");
  }
  if (j.contains("agent")) parse_agent(j.at("agent"), c.agent, path + ".agent");
  if (j.contains("twin")) {
    const json& t = j.at("twin");
    check_keys(t, {"enabled", "history_ticks", "emb_dim", "hidden", "window",
                   "epochs", "lr", "sync_deadline"},
               path + ".twin");
    get_to(t, "enabled", c.twin_enabled, path + ".twin");
    get_to(t, "history_ticks", c.history_ticks, path + ".twin");
    get_to(t, "emb_dim", c.forecaster.emb_dim, path + ".twin");
    get_to(t, "hidden", c.forecaster.hidden, path + ".twin");
    get_to(t, "window", c.forecaster.window, path + ".twin");
    get_to(t, "epochs", c.forecaster.epochs, path + ".twin");
    get_to(t, "lr", c.forecaster.lr, path + ".twin");
    get_to(t, "sync_deadline", c.sync_deadline, path + ".twin");
  }
  if (j.contains("interventions")) {
    const json& iv = j.at("interventions");
    check_keys(iv, {"state", "action", "reward", "lambda", "backup"},
               path + ".interventions");
    get_to(iv, "state", c.interventions.state_enabled, path + ".interventions");
    get_to(iv, "action", c.interventions.action_enabled, path + ".interventions");
    get_to(iv, "reward", c.interventions.reward_enabled, path + ".interventions");
    get_to(iv, "lambda", c.interventions.imbalance_lambda, path + ".interventions");
    if (iv.contains("backup")) {
      const std::string b = iv.at("backup").get<std::string>();
      if (b == "reject")
        c.interventions.backup = safety::BackupPolicy::Reject;
      else if (b == "admit_lru")
        c.interventions.backup = safety::BackupPolicy::AdmitLru;
      else
        throw ConfigError(path + ".interventions.backup: unknown policy " + b);
    }
    if (c.interventions.imbalance_lambda < 0)
      throw ConfigError(path + ".interventions.lambda: must be >= 0");
  }
}

void parse_fedtwin(const json& j, fed::FedTwinConfig& c) {
  const std::string path = "fedtwin";
  check_keys(j,
             {"num_bs", "method", "fixed_k", "rounds", "switch_round",
              "participation", "epochs_per_round", "lr", "forecaster",
              "catalog_size", "ticks_per_bs", "holdout_fraction", "async_delays",
              "staleness_aware", "skew_shift"},
             path);
  get_to(j, "num_bs", c.num_bs, path);
  if (j.contains("method")) {
    const std::string m = j.at("method").get<std::string>();
    if (m == "fixed_k")
      c.method = fed::ClusterMethod::FixedK;
    else if (m == "modularity")
      c.method = fed::ClusterMethod::Modularity;
    else
      throw ConfigError(path + ".method: unknown method " + m);
  }
  get_to(j, "fixed_k", c.fixed_k, path);
  get_to(j, "rounds", c.rounds, path);
  get_to(j, "switch_round", c.switch_round, path);
  get_to(j, "participation", c.participation, path);
  get_to(j, "epochs_per_round", c.epochs_per_round, path);
  get_to(j, "lr", c.lr, path);
  get_to(j, "catalog_size", c.catalog_size, path);
  get_to(j, "ticks_per_bs", c.ticks_per_bs, path);
  get_to(j, "holdout_fraction", c.holdout_fraction, path);
  get_to(j, "async_delays", c.async_delays, path);
  get_to(j, "staleness_aware", c.staleness_aware, path);
  get_to(j, "skew_shift", c.skew_shift, path);
  if (j.contains("forecaster")) {
    const json& f = j.at("forecaster");
    check_keys(f, {"emb_dim", "hidden", "window"}, path + ".forecaster");
    get_to(f, "emb_dim", c.forecaster.emb_dim, path + ".forecaster");
    get_to(f, "hidden", c.forecaster.hidden, path + ".forecaster");
    get_to(f, "window", c.forecaster.window, path + ".forecaster");
  }
  if (c.participation <= 0.0 || c.participation > 1.0)
    throw ConfigError(path + ".participation: must be in (0, 1]");
}

void parse_frl(const json& j, frl::FrlConfig& c) {
  const std::string path = "frl";
  check_keys(j,
             {"agents", "adversary_fraction", "attack", "rule", "rounds",
              "episodes_per_round", "eval_scenarios", "eval_hard_brake_weight",
              "probe_size", "agent", "ranges"},
             path);
  get_to(j, "agents", c.agents, path);
  get_to(j, "adversary_fraction", c.adversary_fraction, path);
  get_to(j, "rounds", c.rounds, path);
  get_to(j, "episodes_per_round", c.episodes_per_round, path);
  get_to(j, "eval_scenarios", c.eval_scenarios, path);
  get_to(j, "eval_hard_brake_weight", c.eval_hard_brake_weight, path);
  get_to(j, "probe_size", c.probe_size, path);
  if (j.contains("attack")) {
    const json& a = j.at("attack");
    check_keys(a, {"kind", "sigma", "factor"}, path + ".attack");
    if (a.contains("kind"))
      c.attack.kind = frl::attack_from_name(a.at("kind").get<std::string>());
    get_to(a, "sigma", c.attack.sigma, path + ".attack");
    get_to(a, "factor", c.attack.factor, path + ".attack");
  }
  if (j.contains("rule")) {
    const json& r = j.at("rule");
    check_keys(r, {"kind", "beta", "k"}, path + ".rule");
    if (r.contains("kind"))
      c.rule.kind = frl::rule_from_name(r.at("kind").get<std::string>());
    get_to(r, "beta", c.rule.beta, path + ".rule");
    get_to(r, "k", c.rule.k, path + ".rule");
  }
  if (j.contains("agent")) parse_agent(j.at("agent"), c.hyper, path + ".agent");
  if (j.contains("ranges")) {
    const json& r = j.at("ranges");
    check_keys(r,
               {"speed_min", "speed_max", "gap_front_min", "gap_front_max",
                "rear_headway_min", "rear_headway_max", "horizon"},
               path + ".ranges");
    get_to(r, "speed_min", c.ranges.speed_min, path + ".ranges");
    get_to(r, "speed_max", c.ranges.speed_max, path + ".ranges");
    get_to(r, "gap_front_min", c.ranges.gap_front_min, path + ".ranges");
    get_to(r, "gap_front_max", c.ranges.gap_front_max, path + ".ranges");
    get_to(r, "rear_headway_min", c.ranges.rear_headway_min, path + ".ranges");
    get_to(r, "rear_headway_max", c.ranges.rear_headway_max, path + ".ranges");
    get_to(r, "horizon", c.ranges.horizon, path + ".ranges");
  }
  const double fn = c.adversary_fraction * c.agents;
  if (std::abs(fn - std::llround(fn)) > 1e-9)
    throw ConfigError(path + ": adversary_fraction * agents must be integral");
  if (c.adversary_fraction < 0.0 || c.adversary_fraction >= 0.5)
    throw ConfigError(path + ": adversary_fraction must be in [0, 0.5)");
}

}  // namespace

ExperimentConfig parse_config(const json& root) {
  check_keys(root, {"pipeline", "seed", "output_dir", "caching", "fedtwin", "frl"},
             "config");
  if (!root.contains("seed")) throw ConfigError("config.seed: mandatory key missing");
  if (!root.contains("pipeline"))
    throw ConfigError("config.pipeline: mandatory key missing");

  ExperimentConfig c;
  const std::string p = root.at("pipeline").get<std::string>();
  if (p == "caching")
    c.pipeline = Pipeline::Caching;
  else if (p == "fedtwin")
    c.pipeline = Pipeline::FedTwin;
  else if (p == "frl")
    c.pipeline = Pipeline::Frl;
  else
    throw ConfigError("config.pipeline: unknown pipeline " + p);

  if (!root.at("seed").is_number_unsigned() && !root.at("seed").is_number_integer())
    throw ConfigError("config.seed: must be a non-negative integer");
  c.seed = root.at("seed").get<std::uint64_t>();
  get_to(root, "output_dir", c.output_dir, "config");

  for (const char* block : {"caching", "fedtwin", "frl"})
    if (root.contains(block) && block != p)
      throw ConfigError(std::string("config.") + block +
                        ": block does not match pipeline '" + p + "'");

  if (c.pipeline == Pipeline::Caching && root.contains("caching"))
    parse_caching(root.at("caching"), c.caching);
  if (c.pipeline == Pipeline::FedTwin && root.contains("fedtwin"))
    parse_fedtwin(root.at("fedtwin"), c.fedtwin);
  if (c.pipeline == Pipeline::Frl && root.contains("frl"))
    parse_frl(root.at("frl"), c.frl);
  if (c.pipeline == Pipeline::FedTwin) c.fedtwin.seed = c.seed;
  if (c.pipeline == Pipeline::Frl) c.frl.seed = c.seed;
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(root);
}

json to_canonical_json(const ExperimentConfig& c) {
  json root;
  root["pipeline"] = pipeline_name(c.pipeline);
  root["seed"] = c.seed;
  root["output_dir"] = c.output_dir;
  switch (c.pipeline) {
    case Pipeline::Caching: {
      const CachingConfig& cc = c.caching;
      json j;
      j["catalog_size"] = cc.catalog_size;
      j["num_bs"] = cc.num_bs;
      j["num_clients"] = cc.num_clients;
      j["requests_per_tick"] = cc.requests_per_tick;
      j["ticks"] = cc.ticks;
      j["zipf_exponent"] = cc.zipf_exponent;
      j["client_skew"] = cc.client_skew;
      j["cache_capacity"] = cc.cache_capacity;
      j["candidates"] = cc.candidates;
      j["service_capacity"] = cc.service_capacity;
      j["load_window"] = cc.load_window;
      j["work_hit"] = cc.work_hit;
      j["work_install"] = cc.work_install;
      j["work_origin"] = cc.work_origin;
      j["history_ticks"] = cc.history_ticks;
      j["write_episode_log"] = cc.write_episode_log;
      j["reward"] = {{"r_hit", cc.reward.r_hit},
                     {"r_miss", cc.reward.r_miss},
                     {"c_overload", cc.reward.c_overload},
                     {"overload_threshold", cc.reward.overload_threshold}};
      j["agent"] = {{"hidden", cc.agent.hidden},
                    {"gamma", cc.agent.gamma},
                    {"lr", cc.agent.lr},
                    {"batch_size", cc.agent.batch_size},
                    {"buffer_capacity", cc.agent.buffer_capacity},
                    {"target_sync_every", cc.agent.target_sync_every},
                    {"train_every", cc.agent.train_every},
                    {"eps_start", cc.agent.eps.eps_start},
                    {"eps_end", cc.agent.eps.eps_end},
                    {"eps_decay_steps", cc.agent.eps.decay_steps}};
      j["twin"] = {{"enabled", cc.twin_enabled},
                   {"history_ticks", cc.history_ticks},
                   {"emb_dim", cc.forecaster.emb_dim},
                   {"hidden", cc.forecaster.hidden},
                   {"window", cc.forecaster.window},
                   {"epochs", cc.forecaster.epochs},
                   {"lr", cc.forecaster.lr},
                   {"sync_deadline", cc.sync_deadline}};
      j["interventions"] = {
          {"state", cc.interventions.state_enabled},
          {"action", cc.interventions.action_enabled},
          {"reward", cc.interventions.reward_enabled},
          {"lambda", cc.interventions.imbalance_lambda},
          {"backup", cc.interventions.backup == safety::BackupPolicy::Reject
                         ? "reject"
                         : "admit_lru"}};
      root["caching"] = j;
      break;
    }
    case Pipeline::FedTwin: {
      const fed::FedTwinConfig& f = c.fedtwin;
      json j;
      j["num_bs"] = f.num_bs;
      j["method"] = f.method == fed::ClusterMethod::FixedK ? "fixed_k" : "modularity";
      j["fixed_k"] = f.fixed_k;
      j["rounds"] = f.rounds;
      j["switch_round"] = f.switch_round;
      j["participation"] = f.participation;
      j["epochs_per_round"] = f.epochs_per_round;
      j["lr"] = f.lr;
      j["forecaster"] = {{"emb_dim", f.forecaster.emb_dim},
                         {"hidden", f.forecaster.hidden},
                         {"window", f.forecaster.window}};
      j["catalog_size"] = f.catalog_size;
      j["ticks_per_bs"] = f.ticks_per_bs;
      j["holdout_fraction"] = f.holdout_fraction;
      j["async_delays"] = f.async_delays;
      j["staleness_aware"] = f.staleness_aware;
      j["skew_shift"] = f.skew_shift;
      root["fedtwin"] = j;
      break;
    }
    case Pipeline::Frl: {
      const frl::FrlConfig& f = c.frl;
      json j;
      j["agents"] = f.agents;
      j["adversary_fraction"] = f.adversary_fraction;
      j["attack"] = {{"kind", frl::attack_name(f.attack.kind)},
                     {"sigma", f.attack.sigma},
                     {"factor", f.attack.factor}};
      j["rule"] = {{"kind", frl::rule_name(f.rule.kind)},
                   {"beta", f.rule.beta},
                   {"k", f.rule.k}};
      j["rounds"] = f.rounds;
      j["episodes_per_round"] = f.episodes_per_round;
      j["eval_scenarios"] = f.eval_scenarios;
      j["eval_hard_brake_weight"] = f.eval_hard_brake_weight;
      j["probe_size"] = f.probe_size;
      j["agent"] = {{"hidden", f.hyper.hidden},
                    {"gamma", f.hyper.gamma},
                    {"lr", f.hyper.lr},
                    {"batch_size", f.hyper.batch_size},
                    {"buffer_capacity", f.hyper.buffer_capacity},
                    {"target_sync_every", f.hyper.target_sync_every},
                    {"train_every", f.hyper.train_every},
                    {"eps_start", f.hyper.eps.eps_start},
                    {"eps_end", f.hyper.eps.eps_end},
                    {"eps_decay_steps", f.hyper.eps.decay_steps}};
      j["ranges"] = {{"speed_min", f.ranges.speed_min},
                     {"speed_max", f.ranges.speed_max},
                     {"gap_front_min", f.ranges.gap_front_min},
                     {"gap_front_max", f.ranges.gap_front_max},
                     {"rear_headway_min", f.ranges.rear_headway_min},
                     {"rear_headway_max", f.ranges.rear_headway_max},
                     {"horizon", f.ranges.horizon}};
      root["frl"] = j;
      break;
    }
  }
  return root;
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string canon = to_canonical_json(config).dump();
  const std::uint64_t h = fnv1a64(canon);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dnt::harness
