#include "dnt/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "dnt/csvio.hpp"
#include "dnt/error.hpp"
#include "dnt/harness/caching.hpp"
#include "dnt/securefrl.hpp"
#include "nlohmann/json.hpp"

namespace dnt::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_metrics_csv(const std::string& path,
                       const std::map<std::string, double>& metrics) {
  csv::Writer w(path, {"metric", "value"});
  for (const auto& [name, value] : metrics) w.row(name, value);
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::string resolve_output_dir(const std::string& dir) {
  const char* root = std::getenv("DNTSIM_OUTPUT_ROOT");
  if (root != nullptr && root[0] != '\0' && !fs::path(dir).is_absolute())
    return (fs::path(root) / dir).string();
  return dir;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config,
                          const std::string& output_dir_override,
                          const net::RequestTrace* replay_trace) {
  RunSummary summary;
  summary.config_hash = config_hash(config);
  const std::string out_dir = resolve_output_dir(
      output_dir_override.empty() ? config.output_dir : output_dir_override);
  const auto t0 = std::chrono::steady_clock::now();

  try {
    fs::create_directories(out_dir);
    switch (config.pipeline) {
      case Pipeline::Caching: {
        const CachingResult r = run_caching(config.caching, config.seed, replay_trace);
        summary.metrics["hit_rate"] = r.metrics.hit_rate;
        summary.metrics["intervention_rate"] = r.metrics.intervention_rate;
        summary.metrics["max_bs_load"] = r.metrics.max_bs_load;
        summary.metrics["min_bs_load"] = r.metrics.min_bs_load;
        summary.metrics["total_reward"] = r.metrics.total_reward;
        summary.metrics["requests"] = static_cast<double>(r.metrics.requests);
        if (config.caching.twin_enabled)
          summary.metrics["forecaster_ce"] = r.forecaster_final_ce;
        if (config.caching.write_episode_log) {
          const std::string ep = (fs::path(out_dir) / "episode.csv").string();
          cache::write_episode_csv(ep, r.log);
          summary.artifacts.push_back(ep);
        }
        break;
      }
      case Pipeline::FedTwin: {
        const fed::FedReport r = fed::run_fedtwin(config.fedtwin);
        summary.metrics["final_loss"] = r.final_loss;
        summary.metrics["rounds"] = static_cast<double>(r.rounds.size());
        summary.metrics["clusters"] = static_cast<double>(r.partition.num_clusters());
        summary.metrics["modularity"] = r.partition.q;
        const std::string rounds_csv = (fs::path(out_dir) / "rounds.csv").string();
        fed::write_rounds_csv(rounds_csv, r.rounds);
        summary.artifacts.push_back(rounds_csv);
        const std::string part = (fs::path(out_dir) / "partition.json").string();
        fed::write_partition_json(part, r.partition);
        summary.artifacts.push_back(part);
        break;
      }
      case Pipeline::Frl: {
        const frl::FrlReport r = frl::run_frl(config.frl);
        summary.metrics["no_collision_rate"] = r.final_no_collision_rate;
        summary.metrics["rounds"] = static_cast<double>(r.rounds.size());
        const std::string rounds_csv = (fs::path(out_dir) / "rounds.csv").string();
        frl::write_frl_rounds_csv(rounds_csv, r.rounds);
        summary.artifacts.push_back(rounds_csv);
        break;
      }
    }

    const std::string metrics_csv = (fs::path(out_dir) / "metrics.csv").string();
    write_metrics_csv(metrics_csv, summary.metrics);
    summary.artifacts.push_back(metrics_csv);

    json manifest;
    manifest["config_hash"] = summary.config_hash;
    manifest["config"] = to_canonical_json(config);
    write_json_file((fs::path(out_dir) / "manifest.json").string(), manifest);

    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json sj;
    sj["config_hash"] = summary.config_hash;
    sj["metrics"] = summary.metrics;
    sj["wall_seconds"] = summary.wall_seconds;
    sj["artifacts"] = summary.artifacts;
    write_json_file((fs::path(out_dir) / "summary.json").string(), sj);
  } catch (const std::exception& e) {
    summary.ok = false;
    summary.error = e.what();
    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return summary;
}

SweepAxis parse_axis_spec(const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("axis spec must look like path.to.key=v1,v2: " + spec);
  SweepAxis axis;
  axis.key = spec.substr(0, eq);
  std::string rest = spec.substr(eq + 1);
  if (rest.empty()) throw ConfigError("axis spec has no values: " + spec);
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    const std::size_t comma = rest.find(',', pos);
    const std::string tok = rest.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    json v;
    try {
      v = json::parse(tok);
      if (v.is_object() || v.is_array()) v = tok;  // only scalars via axes
    } catch (...) {
      v = tok;  // plain string value
    }
    axis.values.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (axis.values.empty()) throw ConfigError("axis spec has no values: " + spec);
  return axis;
}

namespace {

void set_dotted(json& root, const std::string& dotted, const json& value) {
  json* node = &root;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', pos);
    const std::string key =
        dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) throw ConfigError("bad axis path: " + dotted);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

std::string axis_value_string(const json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

SweepReport run_sweep(const json& base_config, const std::vector<SweepAxis>& axes,
                      int seeds, const std::string& output_dir, int workers) {
  if (seeds < 1) throw ConfigError("run_sweep: seeds must be >= 1");
  const std::string out_root = resolve_output_dir(output_dir);
  fs::create_directories(out_root);

  // Materialize the cross product (empty axes -> single cell).
  std::vector<std::map<std::string, json>> cells{{}};
  for (const SweepAxis& axis : axes) {
    std::vector<std::map<std::string, json>> next;
    next.reserve(cells.size() * axis.values.size());
    for (const auto& cell : cells) {
      for (const json& v : axis.values) {
        auto copy = cell;
        copy[axis.key] = v;
        next.push_back(std::move(copy));
      }
    }
    cells = std::move(next);
  }

  const std::uint64_t base_seed = base_config.contains("seed")
                                      ? base_config.at("seed").get<std::uint64_t>()
                                      : 0;

  struct Job {
    std::size_t index;
    std::map<std::string, json> axis_values;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int s = 0; s < seeds; ++s)
      jobs.push_back({jobs.size(), cells[c], base_seed + static_cast<std::uint64_t>(s)});

  std::vector<SweepCellResult> results(jobs.size());
  std::atomic<std::size_t> next_job{0};
  const int n_workers = workers > 0
                            ? workers
                            : static_cast<int>(std::max(
                                  1u, std::thread::hardware_concurrency()));

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next_job.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      SweepCellResult& out = results[i];
      out.cell_index = job.index;
      out.seed = job.seed;
      for (const auto& [k, v] : job.axis_values)
        out.axis_values[k] = axis_value_string(v);
      try {
        json cfg_json = base_config;
        for (const auto& [k, v] : job.axis_values) set_dotted(cfg_json, k, v);
        cfg_json["seed"] = job.seed;
        ExperimentConfig cfg = parse_config(cfg_json);
        const std::string cell_dir =
            (fs::path(out_root) / ("cell_" + std::to_string(job.index))).string();
        out.summary = run_experiment(cfg, cell_dir);
      } catch (const std::exception& e) {
        out.summary.ok = false;
        out.summary.error = e.what();
      }
    }
  };
  if (n_workers <= 1 || jobs.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Aggregate per cell across seeds: mean/min/max for every metric.
  std::vector<std::string> metric_names;
  for (const SweepCellResult& r : results)
    for (const auto& [name, _] : r.summary.metrics)
      if (std::find(metric_names.begin(), metric_names.end(), name) ==
          metric_names.end())
        metric_names.push_back(name);
  std::sort(metric_names.begin(), metric_names.end());

  std::vector<std::string> header;
  header.push_back("cell");
  for (const SweepAxis& a : axes) header.push_back(a.key);
  header.push_back("seeds_ok");
  header.push_back("error");
  for (const std::string& m : metric_names) {
    header.push_back(m + "_mean");
    header.push_back(m + "_min");
    header.push_back(m + "_max");
  }

  SweepReport report;
  report.aggregate_csv = (fs::path(out_root) / "aggregate.csv").string();
  csv::Writer w(report.aggregate_csv, header);
  const std::size_t cells_count = cells.size();
  for (std::size_t c = 0; c < cells_count; ++c) {
    std::vector<std::string> row;
    row.push_back(std::to_string(c / static_cast<std::size_t>(seeds)));
    // All seed-runs of a cell share axis values; take them from the first.
    const SweepCellResult& first = results[c * static_cast<std::size_t>(seeds)];
    for (const SweepAxis& a : axes) row.push_back(first.axis_values.at(a.key));
    int ok_count = 0;
    std::string error;
    for (int s = 0; s < seeds; ++s) {
      const SweepCellResult& r = results[c * static_cast<std::size_t>(seeds) +
                                         static_cast<std::size_t>(s)];
      if (r.summary.ok)
        ++ok_count;
      else if (error.empty())
        error = r.summary.error;
    }
    row.push_back(std::to_string(ok_count));
    row.push_back(error);
    for (const std::string& m : metric_names) {
      double sum = 0.0, mn = 0.0, mx = 0.0;
      int n = 0;
      for (int s = 0; s < seeds; ++s) {
        const SweepCellResult& r = results[c * static_cast<std::size_t>(seeds) +
                                           static_cast<std::size_t>(s)];
        const auto it = r.summary.metrics.find(m);
        if (!r.summary.ok || it == r.summary.metrics.end()) continue;
        const double v = it->second;
        if (n == 0) {
          mn = mx = v;
        } else {
          mn = std::min(mn, v);
          mx = std::max(mx, v);
        }
        sum += v;
        ++n;
      }
      if (n == 0) {
        row.push_back("");
        row.push_back("");
        row.push_back("");
      } else {
        row.push_back(csv::fmt(sum / n));
        row.push_back(csv::fmt(mn));
        row.push_back(csv::fmt(mx));
      }
    }
    w.row_vec(row);
  }

  // The attack x rule matrix export when both axes are present.
  const bool has_attack = std::any_of(axes.begin(), axes.end(), [](const SweepAxis& a) {
    return a.key == "frl.attack.kind";
  });
  const bool has_rule = std::any_of(axes.begin(), axes.end(), [](const SweepAxis& a) {
    return a.key == "frl.rule.kind";
  });
  if (has_attack && has_rule) {
    csv::Writer hm((fs::path(out_root) / "heatmap.csv").string(),
                   {"attack", "rule", "agents", "no_collision_rate"});
    const int agents = base_config.contains("frl") &&
                               base_config.at("frl").contains("agents")
                           ? base_config.at("frl").at("agents").get<int>()
                           : frl::FrlConfig{}.agents;
    for (std::size_t c = 0; c < cells_count; ++c) {
      const SweepCellResult& first = results[c * static_cast<std::size_t>(seeds)];
      double sum = 0.0;
      int n = 0;
      for (int s = 0; s < seeds; ++s) {
        const SweepCellResult& r = results[c * static_cast<std::size_t>(seeds) +
                                           static_cast<std::size_t>(s)];
        const auto it = r.summary.metrics.find("no_collision_rate");
        if (r.summary.ok && it != r.summary.metrics.end()) {
          sum += it->second;
          ++n;
        }
      }
      hm.row(first.axis_values.at("frl.attack.kind"),
             first.axis_values.at("frl.rule.kind"), agents,
             n == 0 ? -1.0 : sum / n);
    }
  }

  report.cells = std::move(results);
  return report;
}

}  // namespace dnt::harness
