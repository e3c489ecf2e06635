#include "aginglab/orchestrator.hpp"

#include <httplib.h>
#include <signal.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "aginglab/process_util.hpp"
#include "aginglab/trend.hpp"

namespace aginglab {

namespace {

std::atomic<bool> g_interrupted{false};

void interrupt_handler(int) { g_interrupted.store(true); }

void install_interrupt_handlers() {
  g_interrupted.store(false);
  std::signal(SIGINT, interrupt_handler);
  std::signal(SIGTERM, interrupt_handler);
}

nlohmann::json profile_to_json(const DegradationProfile& p) {
  return {{"leak_per_request", p.leak_per_request},
          {"base_latency_ms", p.base_latency_ms},
          {"latency_growth_ms_per_hour", p.latency_growth_ms_per_hour},
          {"latency_jitter_ms", p.latency_jitter_ms},
          {"sawtooth_period_s", p.sawtooth_period_s},
          {"seed", p.seed}};
}

nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json doc;
  doc["run_id"] = c.run_id;
  doc["seed"] = c.seed;
  doc["output_dir"] = c.output_dir.string();
  if (c.builtin) {
    doc["target"]["builtin"] = profile_to_json(c.builtin->profile);
    doc["target"]["builtin"]["port"] = c.builtin->port;
  }
  if (c.external) {
    doc["target"]["external"] = {{"url", c.external->url},
                                 {"pid", c.external->pid},
                                 {"process_name", c.external->process_name}};
  }
  doc["workload"] = {
      {"worker_count", c.workload.worker_count},
      {"dispatch_interval_s", c.workload.dispatch_interval_s},
      {"duration_s", c.workload.duration_s},
      {"method", c.workload.method == HttpMethod::GET ? "GET" : "POST"},
      {"request_timeout_s", c.workload.request_timeout_s},
      {"reuse_connections", c.workload.reuse_connections}};
  if (c.workload.body) doc["workload"]["body"] = *c.workload.body;
  doc["monitor"] = {{"sample_interval_s", c.monitor_interval_s}};
  doc["analysis"] = {
      {"alpha", c.analysis.alpha},
      {"bucket_width_s", c.analysis.bucket_width_s},
      {"response_time_mode", c.analysis.response_time_raw ? "raw" : "bucketed"}};
  return doc;
}

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error("config-parse", std::string("field '") + key +
                                    "' has the wrong type");
  }
}

DegradationProfile profile_from_json(const nlohmann::json& j) {
  DegradationProfile p;
  p.leak_per_request = field_or<std::uint64_t>(j, "leak_per_request", 0);
  p.base_latency_ms = field_or<double>(j, "base_latency_ms", 0.0);
  p.latency_growth_ms_per_hour =
      field_or<double>(j, "latency_growth_ms_per_hour", 0.0);
  p.latency_jitter_ms = field_or<double>(j, "latency_jitter_ms", 0.0);
  p.sawtooth_period_s = field_or<double>(j, "sawtooth_period_s", 0.0);
  p.seed = field_or<std::uint64_t>(j, "seed", 0);
  return p;
}

// Streams monitor snapshots into one CSV per metric as they are taken, so
// a killed run still leaves analyzable series behind.
class SnapshotCsvStreams {
public:
  explicit SnapshotCsvStreams(const std::filesystem::path& dir) {
    static constexpr MetricKind kKinds[] = {
        MetricKind::system_memory_used, MetricKind::process_rss,
        MetricKind::cpu_percent, MetricKind::io_read_bytes,
        MetricKind::io_write_bytes};
    for (std::size_t i = 0; i < files_.size(); ++i) {
      const auto path = dir / (std::string(kind_slug(kKinds[i])) + ".csv");
      files_[i] = std::fopen(path.c_str(), "wb");
      if (!files_[i] || std::fputs("t_seconds,value\n", files_[i]) < 0) {
        failed_ = true;
      }
    }
  }

  ~SnapshotCsvStreams() {
    for (FILE* f : files_) {
      if (f) std::fclose(f);
    }
  }

  void append(const ResourceSnapshot& s) {
    const std::array<double, 5> values = {
        s.system_memory_used_bytes, s.process_rss_bytes,
        s.process_cpu_percent, s.io_read_bytes, s.io_write_bytes};
    for (std::size_t i = 0; i < files_.size(); ++i) {
      if (!files_[i]) continue;
      const std::string line =
          format_double(s.t) + "," + format_double(values[i]) + "\n";
      if (std::fwrite(line.data(), 1, line.size(), files_[i]) != line.size()) {
        failed_ = true;
      }
    }
  }

  void flush() {
    for (FILE* f : files_) {
      if (f && std::fflush(f) != 0) failed_ = true;
    }
  }

  bool failed() const { return failed_; }

private:
  std::array<FILE*, 5> files_{};
  bool failed_ = false;
};

struct ResolvedTarget {
  std::string url;
  int pid = -1;
  int child_pid = -1;  // spawned builtin target, if any
};

// Builtin targets run as a separate child process so the monitor
// attributes RSS to the service alone, not to the harness.
ResolvedTarget resolve_target(const RunConfig& config) {
  ResolvedTarget out;
  if (config.builtin) {
    const auto& b = *config.builtin;
    const std::string exe = self_exe_path();
    std::vector<std::string> argv = {
        exe,
        "target",
        "--port", std::to_string(b.port),
        "--leak-bytes", std::to_string(b.profile.leak_per_request),
        "--base-latency-ms", format_double(b.profile.base_latency_ms),
        "--latency-growth-ms-per-h",
        format_double(b.profile.latency_growth_ms_per_hour),
        "--latency-jitter-ms", format_double(b.profile.latency_jitter_ms),
        "--seed", std::to_string(b.profile.seed)};
    if (b.profile.sawtooth_period_s > 0.0) {
      argv.push_back("--sawtooth-period-s");
      argv.push_back(format_double(b.profile.sawtooth_period_s));
    }
    out.child_pid = spawn_child(argv);
    out.pid = out.child_pid;
    out.url = "http://127.0.0.1:" + std::to_string(b.port) + "/work";
    // readiness means /healthz 200: the target answers 503 while it warms
    // up, and starting the clock mid-warmup would put the target's own
    // settling inside the measurement window
    bool up = false;
    for (int i = 0; i < 300; ++i) {
      httplib::Client health("127.0.0.1", b.port);
      health.set_connection_timeout(0, 250000);
      health.set_read_timeout(1, 0);
      if (auto res = health.Get("/healthz"); res && res->status == 200) {
        up = true;
        break;
      }
      int status = 0;
      if (wait_child_exit(out.child_pid, 0.0, &status)) {
        throw Error("target-unreachable",
                    "builtin target exited during startup (port busy?)");
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    if (!up) {
      terminate_child(out.child_pid);
      throw Error("target-unreachable", "builtin target never became ready");
    }
  } else if (config.external) {
    out.url = config.external->url;
    out.pid = config.external->pid;
    if (out.pid < 0 && !config.external->process_name.empty()) {
      out.pid = find_pid_by_name(config.external->process_name);
    }
  } else {
    throw Error("config-parse", "no target configured");
  }
  return out;
}

void write_manifest(const RunConfig& config, const std::string& started_at) {
  nlohmann::json manifest;
  manifest["tool"] = "aging-lab";
  manifest["tool_version"] = std::string(kToolVersion);
  manifest["run_id"] = config.run_id;
  manifest["started_at_utc"] = started_at;
  manifest["seed"] = config.seed;
  manifest["config"] = config_to_json(config);
  manifest["memory_note"] =
      "used memory = MemTotal - MemFree - Buffers - Cached - SReclaimable";
  std::ofstream out(config.output_dir / "run-manifest.json",
                    std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io-failure", "cannot write run-manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out.flush()) throw Error("io-failure", "cannot write run-manifest.json");
}

void write_summary(const RunConfig& config, const WorkloadSummary& workload,
                   const MonitorResult* monitor) {
  nlohmann::json doc;
  doc["workload"] = {{"total_requests", workload.total_requests},
                     {"error_count", workload.error_count},
                     {"elapsed_s", workload.elapsed_s},
                     {"mean_latency_ms", workload.mean_latency_ms},
                     {"max_latency_ms", workload.max_latency_ms},
                     {"achieved_rate_rps", workload.achieved_rate_rps}};
  if (monitor) {
    doc["monitor"] = {{"snapshot_count", monitor->snapshot_count},
                      {"target_exited_early", monitor->target_exited_early},
                      {"monitor_cpu_s", monitor->monitor_cpu_s},
                      {"elapsed_s", monitor->elapsed_s}};
  }
  doc["interrupted"] = g_interrupted.load();
  std::ofstream out(config.output_dir / "summary.json",
                    std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io-failure", "cannot write summary.json");
  out << doc.dump(2) << "\n";
  if (!out.flush()) throw Error("io-failure", "cannot write summary.json");
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text,
                                    const std::string& origin_name) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config-parse", origin_name + ": " + e.what());
  }

  RunConfig config;
  config.run_id = field_or<std::string>(doc, "run_id", "");
  config.seed = field_or<std::uint64_t>(doc, "seed", 1);
  config.output_dir = field_or<std::string>(doc, "output_dir", "");
  if (config.output_dir.empty()) {
    throw Error("config-parse", origin_name + ": output_dir is required");
  }
  if (config.run_id.empty()) {
    config.run_id = config.output_dir.filename().string();
  }

  if (!doc.contains("target")) {
    throw Error("config-parse", origin_name + ": target section is required");
  }
  const auto& target = doc.at("target");
  if (target.contains("builtin") == target.contains("external")) {
    throw Error("config-parse",
                origin_name +
                    ": target needs exactly one of 'builtin' or 'external'");
  }
  if (target.contains("builtin")) {
    BuiltinTargetConfig b;
    b.profile = profile_from_json(target.at("builtin"));
    if (b.profile.seed == 0) b.profile.seed = config.seed;
    b.port = field_or<int>(target.at("builtin"), "port", 18080);
    config.builtin = b;
  } else {
    ExternalTargetConfig e;
    e.url = field_or<std::string>(target.at("external"), "url", "");
    if (e.url.empty()) {
      throw Error("config-parse", origin_name + ": external target needs url");
    }
    e.pid = field_or<int>(target.at("external"), "pid", -1);
    e.process_name =
        field_or<std::string>(target.at("external"), "process_name", "");
    config.external = e;
  }

  const nlohmann::json workload =
      doc.contains("workload") ? doc.at("workload") : nlohmann::json::object();
  config.workload.worker_count = field_or<int>(workload, "worker_count", 1);
  config.workload.dispatch_interval_s =
      field_or<double>(workload, "dispatch_interval_s", 0.01);
  config.workload.duration_s = field_or<double>(workload, "duration_s", 60.0);
  config.workload.request_timeout_s =
      field_or<double>(workload, "request_timeout_s", 5.0);
  config.workload.reuse_connections =
      field_or<bool>(workload, "reuse_connections", true);
  const std::string method = field_or<std::string>(workload, "method", "GET");
  if (method == "GET") {
    config.workload.method = HttpMethod::GET;
  } else if (method == "POST") {
    config.workload.method = HttpMethod::POST;
  } else {
    throw Error("config-parse", origin_name + ": method must be GET or POST");
  }
  if (workload.contains("body")) {
    config.workload.body = field_or<std::string>(workload, "body", "");
  }

  const nlohmann::json monitor =
      doc.contains("monitor") ? doc.at("monitor") : nlohmann::json::object();
  config.monitor_interval_s = field_or<double>(monitor, "sample_interval_s", 1.0);

  const nlohmann::json analysis =
      doc.contains("analysis") ? doc.at("analysis") : nlohmann::json::object();
  config.analysis.alpha = field_or<double>(analysis, "alpha", 0.05);
  config.analysis.bucket_width_s =
      field_or<double>(analysis, "bucket_width_s", 60.0);
  const std::string mode =
      field_or<std::string>(analysis, "response_time_mode", "bucketed");
  if (mode == "raw") {
    config.analysis.response_time_raw = true;
  } else if (mode == "bucketed") {
    config.analysis.response_time_raw = false;
  } else {
    throw Error("config-parse",
                origin_name + ": response_time_mode must be raw or bucketed");
  }

  if (const char* env_seed = std::getenv("AGING_LAB_SEED")) {
    try {
      config.seed = std::stoull(env_seed);
    } catch (const std::exception&) {
      throw Error("config-parse", "AGING_LAB_SEED is not an integer");
    }
  }
  config.analysis.slope.seed = config.seed;

  if (!(config.analysis.alpha > 0.0 && config.analysis.alpha < 1.0)) {
    throw Error("config-parse", origin_name + ": alpha must be in (0,1)");
  }
  if (config.workload.worker_count < 1) {
    throw Error("config-parse", origin_name + ": worker_count must be >= 1");
  }
  if (!(config.workload.duration_s > 0.0)) {
    throw Error("config-parse", origin_name + ": duration_s must be > 0");
  }
  if (!(config.monitor_interval_s > 0.0)) {
    throw Error("config-parse", origin_name + ": sample_interval_s must be > 0");
  }
  return config;
}

RunConfig parse_run_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("config-parse", "cannot open " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json_text(buf.str(), file.string());
}

int cmd_target(const DegradationProfile& profile, int port) {
  pin_allocator_thresholds();
  // only a non-leaking target wants a preheated flat footprint; for a
  // leaking one the preheat would swallow the first megabytes of signal
  if (profile.leak_per_request == 0) preheat_allocator_arena();
  SyntheticTarget target(profile, port);
  target.start();  // throws bind-failed -> exit 2 in main

  install_interrupt_handlers();
  std::cout << "aging-lab target serving\n"
            << "  pid:   " << ::getpid() << "\n"
            << "  port:  " << port << "\n"
            << "  state: http://127.0.0.1:" << port << "/debug/state\n"
            << std::flush;
  while (!g_interrupted.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  target.stop();
  return kExitOk;
}

int cmd_run(const RunConfig& config) {
  stabilize_process_footprint();
  install_interrupt_handlers();

  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw Error("io-failure", config.output_dir.string());

  ResolvedTarget target = resolve_target(config);
  int exit_code = kExitOk;
  try {
    WorkloadSpec workload = config.workload;
    workload.target_url = target.url;

    if (!probe(workload.target_url, workload.request_timeout_s)) {
      throw Error("target-unreachable", workload.target_url);
    }

    write_manifest(config, utc_timestamp());

    CsvRecordSink records(config.output_dir / "records.csv");
    SnapshotCsvStreams snapshots(config.output_dir);

    // one clock origin shared by driver and monitor, so records and
    // snapshots live on the same t axis
    const auto origin = std::chrono::steady_clock::now();

    MonitorResult monitor_result;
    std::thread monitor_thread;
    const bool have_pid = target.pid > 0 && process_alive(target.pid);
    if (have_pid) {
      MonitorSpec mspec;
      mspec.target_pid = target.pid;
      mspec.sample_interval_s = config.monitor_interval_s;
      mspec.duration_s = config.workload.duration_s;
      monitor_thread = std::thread([&] {
        monitor_result = monitor_loop(
            mspec, origin, &g_interrupted,
            [&](const ResourceSnapshot& s) { snapshots.append(s); });
      });
    }

    const WorkloadSummary summary =
        run_workload(workload, records, origin, &g_interrupted);
    if (monitor_thread.joinable()) monitor_thread.join();

    records.flush();
    snapshots.flush();
    write_summary(config, summary, have_pid ? &monitor_result : nullptr);

    if (records.io_failed() || snapshots.failed()) {
      throw Error("io-failure", "record/snapshot streams failed mid-run");
    }
  } catch (...) {
    if (target.child_pid > 0) terminate_child(target.child_pid);
    throw;
  }
  if (target.child_pid > 0) terminate_child(target.child_pid);
  return exit_code;
}

int cmd_analyze(const std::filesystem::path& run_dir,
                const AnalyzeOptions& opts, TableStyle style) {
  const AgingReport report = analyze_run(run_dir, opts);
  write_report_artifacts(report, run_dir);
  emit_plot_data(report, run_dir);
  std::cout << render_table(report, style);
  return kExitOk;
}

int cmd_full(const RunConfig& config, TableStyle style) {
  const int run_code = cmd_run(config);
  if (run_code != kExitOk) return run_code;

  const AgingReport report = analyze_run(config.output_dir, config.analysis);
  write_report_artifacts(report, config.output_dir);
  emit_plot_data(report, config.output_dir);
  std::cout << render_table(report, style) << "\n";

  for (const auto& row : report.rows) {
    std::cout << kind_name(row.metric) << ": ";
    if (row.insufficient) {
      std::cout << "insufficient-data\n";
      continue;
    }
    std::cout << verdict_name(row.verdict);
    if (row.p_value < report.alpha) {
      std::cout << " (p<" << format_double(report.alpha) << ")";
    } else {
      std::cout << " (p=" << format_p(row.p_value) << ")";
    }
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_selftest() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << what << "\n";
    if (!ok) ++failures;
  };

  check(std::fabs(normal_cdf(0.0) - 0.5) < 1e-12, "normal cdf at 0");
  check(std::fabs(normal_cdf(1.959963984540054) - 0.975) < 1e-9,
        "normal cdf at the 97.5% point");

  {
    TimeSeries s(MetricKind::process_rss);
    for (int i = 0; i < 5; ++i) s.append(i, i + 1.0);
    check(mk_statistic(s) == 10, "mann-kendall statistic on a ramp");
    check(std::fabs(sen_slope(s) - 1.0) < 1e-12, "sen slope on a ramp");
  }

  try {
    const ResourceSnapshot snap = sample_process(::getpid());
    check(snap.process_rss_bytes > 0, "self rss sample");
    check(snap.system_memory_used_bytes > 0, "system memory sample");
  } catch (const Error& e) {
    check(false, std::string("procfs sampling (") + e.what() + ")");
  }

  try {
    const int port = pick_free_port();
    DegradationProfile profile;
    profile.base_latency_ms = 1.0;
    SyntheticTarget target(profile, port);
    target.start();
    const std::string url = "http://127.0.0.1:" + std::to_string(port);
    check(probe(url + "/healthz", 2.0), "probe of a local target");

    VectorRecordSink sink;
    WorkloadSpec spec;
    spec.target_url = url + "/work";
    spec.worker_count = 1;
    spec.duration_s = 1.0;
    spec.dispatch_interval_s = 0.05;
    const WorkloadSummary summary = run_workload(spec, sink);
    check(summary.total_requests > 0 &&
              summary.total_requests == sink.size(),
          "closed-loop driver against the local target");
    target.stop();
  } catch (const Error& e) {
    check(false, std::string("loopback workload (") + e.what() + ")");
  }

  std::cout << (failures == 0 ? "selftest ok\n" : "selftest FAILED\n");
  return failures == 0 ? kExitOk : 1;
}

}  // namespace aginglab
