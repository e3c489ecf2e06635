#include "aginglab/load_driver.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

namespace aginglab {

namespace {

using Clock = std::chrono::steady_clock;

struct WorkerTally {
  std::uint64_t requests = 0;
  std::uint64_t errors = 0;
  double latency_sum_ms = 0.0;
  double latency_max_ms = 0.0;
};

void configure_timeouts(httplib::Client& cli, double timeout_s) {
  const auto whole = static_cast<time_t>(timeout_s);
  const auto micros = static_cast<time_t>((timeout_s - static_cast<double>(whole)) * 1e6);
  cli.set_connection_timeout(whole, micros);
  cli.set_read_timeout(whole, micros);
  cli.set_write_timeout(whole, micros);
}

void worker_loop(const WorkloadSpec& spec, const ParsedUrl& url, int worker_id,
                 Clock::time_point origin, const std::atomic<bool>* stop,
                 RecordSink& sink, WorkerTally& tally) {
  httplib::Client cli(url.host, url.port);
  configure_timeouts(cli, spec.request_timeout_s);
  cli.set_keep_alive(spec.reuse_connections);
  if (!spec.reuse_connections) {
    cli.set_default_headers({{"Connection", "close"}});
  }

  const auto deadline =
      origin + std::chrono::duration_cast<Clock::duration>(
                   std::chrono::duration<double>(spec.duration_s));
  const auto pause = std::chrono::duration<double>(spec.dispatch_interval_s);

  while (Clock::now() < deadline && !(stop && stop->load())) {
    const auto t0 = Clock::now();
    RequestRecord rec;
    rec.dispatch_t = std::chrono::duration<double>(t0 - origin).count();
    rec.worker_id = worker_id;

    httplib::Result res =
        spec.method == HttpMethod::GET
            ? cli.Get(url.path)
            : cli.Post(url.path, spec.body.value_or(std::string()),
                       spec.content_type);
    rec.latency_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    rec.status = res ? res->status : 0;

    sink.append(rec);
    ++tally.requests;
    if (rec.status == 0 || rec.status >= 400) ++tally.errors;
    tally.latency_sum_ms += rec.latency_ms;
    tally.latency_max_ms = std::max(tally.latency_max_ms, rec.latency_ms);

    if (spec.dispatch_interval_s > 0.0) std::this_thread::sleep_for(pause);
  }
}

}  // namespace

ParsedUrl parse_http_url(const std::string& url) {
  ParsedUrl out;
  const std::string prefix = "http://";
  if (url.rfind(prefix, 0) != 0) {
    throw Error("bad-url", "only http:// targets are supported: " + url);
  }
  std::string rest = url.substr(prefix.size());
  const auto slash = rest.find('/');
  std::string hostport = rest.substr(0, slash);
  out.path = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = hostport.find(':');
  if (colon == std::string::npos) {
    out.host = hostport;
  } else {
    out.host = hostport.substr(0, colon);
    try {
      out.port = std::stoi(hostport.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error("bad-url", "bad port in " + url);
    }
  }
  if (out.host.empty() || out.port < 1 || out.port > 65535) {
    throw Error("bad-url", url);
  }
  return out;
}

bool probe(const std::string& url, double timeout_s) {
  try {
    const ParsedUrl parsed = parse_http_url(url);
    httplib::Client cli(parsed.host, parsed.port);
    configure_timeouts(cli, timeout_s);
    auto res = cli.Get(parsed.path);
    return res && res->status >= 1 && res->status <= 599;
  } catch (const Error&) {
    return false;
  }
}

WorkloadSummary run_workload(const WorkloadSpec& spec, RecordSink& sink,
                             Clock::time_point origin,
                             const std::atomic<bool>* stop) {
  if (spec.worker_count < 1 || !(spec.duration_s > 0.0) ||
      !(spec.request_timeout_s > 0.0) || spec.dispatch_interval_s < 0.0) {
    throw Error("invalid-workload-spec");
  }
  const ParsedUrl url = parse_http_url(spec.target_url);
  if (!probe(spec.target_url, spec.request_timeout_s)) {
    throw Error("target-unreachable", spec.target_url);
  }

  std::vector<WorkerTally> tallies(static_cast<std::size_t>(spec.worker_count));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(spec.worker_count));
  for (int w = 0; w < spec.worker_count; ++w) {
    workers.emplace_back(worker_loop, std::cref(spec), std::cref(url), w,
                         origin, stop, std::ref(sink),
                         std::ref(tallies[static_cast<std::size_t>(w)]));
  }
  for (auto& t : workers) t.join();

  WorkloadSummary summary;
  summary.elapsed_s = std::chrono::duration<double>(Clock::now() - origin).count();
  for (const auto& tally : tallies) {
    summary.total_requests += tally.requests;
    summary.error_count += tally.errors;
    summary.mean_latency_ms += tally.latency_sum_ms;
    summary.max_latency_ms = std::max(summary.max_latency_ms, tally.latency_max_ms);
  }
  summary.mean_latency_ms = summary.total_requests > 0
                                ? summary.mean_latency_ms /
                                      static_cast<double>(summary.total_requests)
                                : 0.0;
  summary.achieved_rate_rps =
      summary.elapsed_s > 0.0
          ? static_cast<double>(summary.total_requests) / summary.elapsed_s
          : 0.0;
  return summary;
}

}  // namespace aginglab
