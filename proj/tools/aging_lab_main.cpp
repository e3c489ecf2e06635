// aging-lab: drive a sustained workload against an HTTP service, sample
// its resource telemetry, and test the series for aging trends
// (Mann-Kendall + Sen's slope). Subcommands: target, run, analyze, full,
// selftest.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "aginglab/orchestrator.hpp"
#include "aginglab/process_util.hpp"

namespace {

using namespace aginglab;

int exit_code_for(const Error& e) {
  const std::string& code = e.code();
  if (code == "target-unreachable") return kExitUnreachable;
  if (code == "io-failure" || code == "csv-parse") return kExitIo;
  if (code == "config-parse" || code == "no-series-found" ||
      code == "bind-failed" || code == "bad-style" || code == "bad-url" ||
      code == "invalid-workload-spec") {
    return kExitUsage;
  }
  return 1;
}

struct ProfileFlags {
  std::uint64_t leak_bytes = 0;
  double base_latency_ms = 0.0;
  double latency_growth_ms_per_h = 0.0;
  double latency_jitter_ms = 0.0;
  double sawtooth_period_s = 0.0;
  std::uint64_t seed = 1;

  DegradationProfile to_profile() const {
    DegradationProfile p;
    p.leak_per_request = leak_bytes;
    p.base_latency_ms = base_latency_ms;
    p.latency_growth_ms_per_hour = latency_growth_ms_per_h;
    p.latency_jitter_ms = latency_jitter_ms;
    p.sawtooth_period_s = sawtooth_period_s;
    p.seed = seed;
    return p;
  }
};

void add_profile_flags(CLI::App* app, ProfileFlags& flags) {
  app->add_option("--leak-bytes", flags.leak_bytes,
                  "bytes retained per /work request");
  app->add_option("--base-latency-ms", flags.base_latency_ms,
                  "base service time in ms");
  app->add_option("--latency-growth-ms-per-h", flags.latency_growth_ms_per_h,
                  "added service time per elapsed hour");
  app->add_option("--latency-jitter-ms", flags.latency_jitter_ms,
                  "gaussian jitter stddev in ms");
  app->add_option("--sawtooth-period-s", flags.sawtooth_period_s,
                  "release retained memory to 10% of peak each period");
  app->add_option("--seed", flags.seed, "profile RNG seed");
}

struct RunOverrides {
  std::optional<double> alpha;
  std::optional<double> bucket_width_s;
  std::optional<double> duration_s;
  std::optional<int> workers;
  std::optional<double> interval_s;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> run_id;

  void apply(RunConfig& config) const {
    if (alpha) config.analysis.alpha = *alpha;
    if (bucket_width_s) config.analysis.bucket_width_s = *bucket_width_s;
    if (duration_s) config.workload.duration_s = *duration_s;
    if (workers) config.workload.worker_count = *workers;
    if (interval_s) config.workload.dispatch_interval_s = *interval_s;
    if (output_dir) config.output_dir = *output_dir;
    if (run_id) config.run_id = *run_id;
    if (seed && !std::getenv("AGING_LAB_SEED")) {
      config.seed = *seed;  // AGING_LAB_SEED still wins
      config.analysis.slope.seed = *seed;
    }
  }
};

void add_run_overrides(CLI::App* app, RunOverrides& ov) {
  app->add_option("--alpha", ov.alpha, "significance level override");
  app->add_option("--bucket-width", ov.bucket_width_s,
                  "bucket width in seconds for response-time/throughput");
  app->add_option("--duration-s", ov.duration_s, "workload duration override");
  app->add_option("--workers", ov.workers, "worker count override");
  app->add_option("--interval-s", ov.interval_s,
                  "dispatch interval override (seconds)");
  app->add_option("--output-dir", ov.output_dir, "run directory override");
  app->add_option("--seed", ov.seed, "seed override");
  app->add_option("--run-id", ov.run_id, "run id override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"software-aging detection lab"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // target
  auto* target_cmd =
      app.add_subcommand("target", "serve a synthetic degradation target");
  ProfileFlags profile_flags;
  int target_port = 18080;
  add_profile_flags(target_cmd, profile_flags);
  target_cmd->add_option("--port", target_port, "listen port");

  // run
  auto* run_cmd = app.add_subcommand(
      "run", "execute workload + monitor per a JSON config");
  std::string run_config_path;
  RunOverrides run_overrides;
  run_cmd->add_option("config", run_config_path, "JSON config file")
      ->required();
  add_run_overrides(run_cmd, run_overrides);

  // analyze
  auto* analyze_cmd =
      app.add_subcommand("analyze", "compute trend statistics for a run");
  std::string analyze_dir;
  double analyze_alpha = 0.05;
  double analyze_bucket = 60.0;
  std::string analyze_mode = "bucketed";
  std::string analyze_style = "paper-table-3";
  std::uint64_t analyze_seed = 1;
  analyze_cmd->add_option("run_dir", analyze_dir, "run directory")->required();
  analyze_cmd->add_option("--alpha", analyze_alpha, "significance level");
  analyze_cmd->add_option("--bucket-width", analyze_bucket,
                          "bucket width in seconds");
  analyze_cmd->add_option("--response-time-mode", analyze_mode,
                          "raw or bucketed");
  analyze_cmd->add_option("--style", analyze_style,
                          "paper-table-1|paper-table-2|paper-table-3|full");
  analyze_cmd->add_option("--seed", analyze_seed,
                          "seed for slope subsampling on huge series");

  // full
  auto* full_cmd =
      app.add_subcommand("full", "run then analyze; print verdicts");
  std::string full_config_path;
  RunOverrides full_overrides;
  std::string full_style = "paper-table-3";
  full_cmd->add_option("config", full_config_path, "JSON config file")
      ->required();
  add_run_overrides(full_cmd, full_overrides);
  full_cmd->add_option("--style", full_style, "table style for stdout");

  // selftest
  app.add_subcommand("selftest", "quick environment and math checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : aginglab::kExitUsage;
  }

  try {
    if (target_cmd->parsed()) {
      return cmd_target(profile_flags.to_profile(), target_port);
    }
    if (run_cmd->parsed()) {
      RunConfig config = parse_run_config(run_config_path);
      run_overrides.apply(config);
      return cmd_run(config);
    }
    if (analyze_cmd->parsed()) {
      AnalyzeOptions opts;
      opts.alpha = analyze_alpha;
      opts.bucket_width_s = analyze_bucket;
      if (analyze_mode == "raw") {
        opts.response_time_raw = true;
      } else if (analyze_mode != "bucketed") {
        throw Error("config-parse", "response-time-mode must be raw or bucketed");
      }
      opts.slope.seed = analyze_seed;
      return cmd_analyze(analyze_dir, opts, table_style_from_name(analyze_style));
    }
    if (full_cmd->parsed()) {
      RunConfig config = parse_run_config(full_config_path);
      full_overrides.apply(config);
      return cmd_full(config, table_style_from_name(full_style));
    }
    return cmd_selftest();
  } catch (const Error& e) {
    std::cerr << "aging-lab: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "aging-lab: " << e.what() << "\n";
    return 1;
  }
}
