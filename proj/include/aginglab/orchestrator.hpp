#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "aginglab/load_driver.hpp"
#include "aginglab/report.hpp"
#include "aginglab/resource_monitor.hpp"
#include "aginglab/synthetic_target.hpp"

namespace aginglab {

// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;        // bad flags/config/input
inline constexpr int kExitUnreachable = 3;  // target probe failed
inline constexpr int kExitIo = 4;           // write/flush failure

struct BuiltinTargetConfig {
  DegradationProfile profile;
  int port = 18080;
};

struct ExternalTargetConfig {
  std::string url;
  int pid = -1;                // -1: unknown, resource rows become
  std::string process_name;   // insufficient-data unless resolvable by name
};

// One experiment: exactly one of builtin/external target, a workload, a
// monitor cadence, and analysis settings. Everything lands under
// output_dir, which a later analyze needs nothing outside of.
struct RunConfig {
  std::string run_id;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;
  std::optional<BuiltinTargetConfig> builtin;
  std::optional<ExternalTargetConfig> external;
  WorkloadSpec workload;
  double monitor_interval_s = 1.0;
  AnalyzeOptions analysis;
};

// Parses the JSON config document; throws "config-parse" with a
// line/field diagnostic. AGING_LAB_SEED in the environment overrides the
// config seed.
RunConfig parse_run_config(const std::filesystem::path& file);
RunConfig run_config_from_json_text(const std::string& text,
                                    const std::string& origin_name);

int cmd_target(const DegradationProfile& profile, int port);
int cmd_run(const RunConfig& config);
int cmd_analyze(const std::filesystem::path& run_dir,
                const AnalyzeOptions& opts, TableStyle style);
int cmd_full(const RunConfig& config, TableStyle style);
int cmd_selftest();

}  // namespace aginglab
