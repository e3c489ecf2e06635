#pragma once

#include <atomic>
#include <chrono>
#include <optional>
#include <string>

#include "aginglab/metrics.hpp"

namespace aginglab {

enum class HttpMethod { GET, POST };

// Closed-loop workload description: each worker waits for its response,
// then pauses dispatch_interval before the next request.
struct WorkloadSpec {
  std::string target_url;
  int worker_count = 1;
  double dispatch_interval_s = 0.0;
  double duration_s = 0.0;
  HttpMethod method = HttpMethod::GET;
  std::optional<std::string> body;  // POST payload
  std::string content_type = "application/octet-stream";
  double request_timeout_s = 5.0;
  bool reuse_connections = true;  // persistent connections, JMeter-style
};

struct WorkloadSummary {
  std::uint64_t total_requests = 0;
  std::uint64_t error_count = 0;  // status 0 or >= 400
  double elapsed_s = 0.0;
  double mean_latency_ms = 0.0;
  double max_latency_ms = 0.0;
  double achieved_rate_rps = 0.0;
};

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path = "/";
};

ParsedUrl parse_http_url(const std::string& url);  // throws "bad-url"

// True iff one request completes with a status in [1, 599] within the
// timeout.
bool probe(const std::string& url, double timeout_s);

// Runs the workload against spec.target_url. One probe must succeed first
// ("target-unreachable" otherwise); mid-run failures become status-0
// records and never abort the run. Records stream to the sink as they
// happen; per-worker dispatch order is preserved. The optional origin
// pins the t axis shared with the resource monitor; stop aborts early.
WorkloadSummary run_workload(
    const WorkloadSpec& spec, RecordSink& sink,
    std::chrono::steady_clock::time_point origin =
        std::chrono::steady_clock::now(),
    const std::atomic<bool>* stop = nullptr);

}  // namespace aginglab
