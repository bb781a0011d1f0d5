#include "dnt/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dnt/csvio.hpp"
#include "dnt/error.hpp"

namespace dnt::net {

std::vector<double> zipf_pmf(const ZipfParams& params) {
  if (params.catalog_size < 1)
    throw InvalidArgument("zipf_pmf: catalog_size must be >= 1");
  if (params.exponent < 0.0)
    throw InvalidArgument("zipf_pmf: exponent must be >= 0");
  std::vector<double> pmf(static_cast<std::size_t>(params.catalog_size));
  double total = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    pmf[i] = std::pow(static_cast<double>(i + 1), -params.exponent);
    total += pmf[i];
  }
  for (double& p : pmf) p /= total;
  return pmf;
}

namespace {

std::vector<double> cumulative(const std::vector<double>& pmf) {
  std::vector<double> cdf(pmf.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    acc += pmf[i];
    cdf[i] = acc;
  }
  cdf.back() = 1.0;
  return cdf;
}

std::size_t draw_index(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace

RequestSampler::RequestSampler(const TraceConfig& config)
    : num_bs_(config.num_bs) {
  if (config.num_clients < 1 || config.num_bs < 1)
    throw InvalidArgument("RequestSampler: need at least one client and one BS");
  content_pmf_ = zipf_pmf(config.zipf);
  content_cdf_ = cumulative(content_pmf_);
  client_pmf_ = zipf_pmf({config.client_skew, config.num_clients});
  client_cdf_ = cumulative(client_pmf_);
}

Request RequestSampler::sample(std::int64_t tick, Rng& rng) const {
  Request r;
  r.time = tick;
  r.content_id = static_cast<std::int32_t>(draw_index(content_cdf_, rng));
  r.client_id = static_cast<std::int32_t>(draw_index(client_cdf_, rng));
  r.bs_id = static_cast<std::int32_t>(home_bs(r.client_id));
  return r;
}

RequestTrace generate_trace(const TraceConfig& config, Rng& rng) {
  if (config.ticks < 0) throw InvalidArgument("generate_trace: ticks must be >= 0");
  RequestTrace trace;
  trace.reserve(static_cast<std::size_t>(config.ticks * config.requests_per_tick));
  if (config.ticks == 0) return trace;
  RequestSampler sampler(config);
  for (std::int64_t t = 0; t < config.ticks; ++t)
    for (int i = 0; i < config.requests_per_tick; ++i)
      trace.push_back(sampler.sample(t, rng));
  return trace;
}

void write_trace_csv(const std::string& path, const RequestTrace& trace) {
  csv::Writer w(path, {"tick", "content_id", "client_id", "bs_id"});
  for (const Request& r : trace) w.row(r.time, r.content_id, r.client_id, r.bs_id);
}

RequestTrace read_trace_csv(const std::string& path) {
  const csv::Table t = csv::read(path);
  const std::vector<std::string> expect{"tick", "content_id", "client_id", "bs_id"};
  if (t.header != expect) throw Error("trace CSV: unexpected header in " + path);
  RequestTrace trace;
  trace.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    if (row.size() != 4) throw Error("trace CSV: malformed row in " + path);
    Request r;
    r.time = std::stoll(row[0]);
    r.content_id = static_cast<std::int32_t>(std::stol(row[1]));
    r.client_id = static_cast<std::int32_t>(std::stol(row[2]));
    r.bs_id = static_cast<std::int32_t>(std::stol(row[3]));
    trace.push_back(r);
  }
  return trace;
}

ServiceWindow::ServiceWindow(int length, double capacity_per_tick)
    : ring_(static_cast<std::size_t>(length), 0.0), capacity_(capacity_per_tick) {
  if (length < 1) throw InvalidArgument("ServiceWindow: length must be >= 1");
  if (capacity_per_tick <= 0.0)
    throw InvalidArgument("ServiceWindow: capacity must be > 0");
}

void ServiceWindow::roll_to(std::int64_t tick) {
  if (tick <= tick_) return;
  const std::int64_t steps = std::min<std::int64_t>(tick - tick_, length());
  for (std::int64_t i = 1; i <= steps; ++i)
    ring_[static_cast<std::size_t>((tick_ + i) % length())] = 0.0;
  tick_ = tick;
}

void ServiceWindow::add(std::int64_t tick, double units) {
  roll_to(tick);
  ring_[static_cast<std::size_t>(tick_ % length())] += units;
}

double ServiceWindow::load(int window) const {
  const int len = length();
  int w = window <= 0 ? len : std::min(window, len);
  double sum = 0.0;
  for (int i = 0; i < w; ++i) {
    const std::int64_t t = tick_ - i;
    if (t < 0) break;
    sum += ring_[static_cast<std::size_t>(t % len)];
  }
  const double load = sum / (static_cast<double>(w) * capacity_);
  return std::clamp(load, 0.0, 1.0);
}

double bs_load(const BaseStation& bs, int window) {
  if (window < 1) throw InvalidArgument("bs_load: window must be >= 1");
  return bs.served.load(window);
}

}  // namespace dnt::net
