#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "aginglab/orchestrator.hpp"
#include "aginglab/process_util.hpp"
#include "aginglab/load_driver.hpp"
#include "aginglab/synthetic_target.hpp"

using namespace aginglab;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const fs::path out_file =
      fs::temp_directory_path() / ("aginglab_cli_out_" +
                                   std::to_string(::getpid()) + ".txt");
  const std::string command = std::string(AGING_LAB_BIN) + " " + args + " > " +
                              out_file.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream text;
  text << in.rdbuf();
  result.output = text.str();
  fs::remove(out_file);
  return result;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string write_config(const fs::path& where, const nlohmann::json& doc) {
  const fs::path file = where / "config.json";
  std::ofstream out(file);
  out << doc.dump(2);
  return file.string();
}

}  // namespace

TEST_CASE("selftest passes in this environment") {
  const auto result = run_cli("selftest");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("selftest ok") != std::string::npos);
}

TEST_CASE("malformed config exits 2 with a diagnostic") {
  TempDir dir("aginglab_cli_badcfg");
  const fs::path file = dir.path / "config.json";
  {
    std::ofstream out(file);
    out << "{ \"output_dir\": ";  // truncated document
  }
  const auto result = run_cli("run " + file.string());
  CHECK(result.exit_code == kExitUsage);
  CHECK(result.output.find("config-parse") != std::string::npos);

  // structurally valid JSON but missing required sections
  {
    std::ofstream out(file);
    out << R"({"output_dir": "x"})";
  }
  const auto missing = run_cli("run " + file.string());
  CHECK(missing.exit_code == kExitUsage);
  CHECK(missing.output.find("target") != std::string::npos);
}

TEST_CASE("occupied port makes the target exit 2") {
  DegradationProfile profile;
  const int port = pick_free_port();
  SyntheticTarget holder(profile, port);
  holder.start();
  const auto result =
      run_cli("target --port " + std::to_string(port) + " --leak-bytes 16");
  holder.stop();
  CHECK(result.exit_code == kExitUsage);
  CHECK(result.output.find("bind-failed") != std::string::npos);
}

TEST_CASE("analyze of an empty directory exits 2") {
  TempDir dir("aginglab_cli_emptyrun");
  const auto result = run_cli("analyze " + dir.path.string());
  CHECK(result.exit_code == kExitUsage);
  CHECK(result.output.find("no-series-found") != std::string::npos);
}

TEST_CASE("unreachable external target exits 3") {
  TempDir dir("aginglab_cli_unreach");
  nlohmann::json cfg;
  cfg["output_dir"] = (dir.path / "run").string();
  cfg["target"]["external"]["url"] =
      "http://127.0.0.1:" + std::to_string(pick_free_port()) + "/";
  cfg["workload"] = {{"worker_count", 1},
                     {"duration_s", 2.0},
                     {"request_timeout_s", 0.5}};
  const auto result = run_cli("run " + write_config(dir.path, cfg));
  CHECK(result.exit_code == kExitUnreachable);
  CHECK(result.output.find("target-unreachable") != std::string::npos);
}

TEST_CASE("paper-scale workload configuration is accepted by validation") {
  TempDir dir("aginglab_cli_paperscale");
  nlohmann::json cfg;
  cfg["output_dir"] = (dir.path / "run").string();
  cfg["target"]["builtin"] = {{"leak_per_request", 0}, {"port", 18080}};
  cfg["workload"] = {{"worker_count", 10},
                     {"dispatch_interval_s", 0.01},
                     {"duration_s", 50.0 * 3600.0}};  // 50 continuous hours
  const fs::path file = dir.path / "config.json";
  {
    std::ofstream out(file);
    out << cfg.dump(2);
  }
  const RunConfig parsed = parse_run_config(file);
  CHECK(parsed.workload.worker_count == 10);
  CHECK(parsed.workload.dispatch_interval_s == 0.01);
  CHECK(parsed.workload.duration_s == 180000.0);
}

TEST_CASE("AGING_LAB_SEED overrides the config seed") {
  TempDir dir("aginglab_cli_seed");
  nlohmann::json cfg;
  cfg["output_dir"] = (dir.path / "run").string();
  cfg["seed"] = 5;
  cfg["target"]["builtin"] = {{"leak_per_request", 0}};
  const fs::path file = dir.path / "config.json";
  {
    std::ofstream out(file);
    out << cfg.dump(2);
  }
  ::setenv("AGING_LAB_SEED", "777", 1);
  const RunConfig parsed = parse_run_config(file);
  ::unsetenv("AGING_LAB_SEED");
  CHECK(parsed.seed == 777);
  CHECK(parsed.analysis.slope.seed == 777);

  ::setenv("AGING_LAB_SEED", "not-a-number", 1);
  CHECK_THROWS_AS(parse_run_config(file), Error);
  ::unsetenv("AGING_LAB_SEED");
}

TEST_CASE("full run against a leaky builtin target produces a complete run dir") {
  TempDir dir("aginglab_cli_full");
  const fs::path run_dir = dir.path / "run";
  const int port = pick_free_port();

  nlohmann::json cfg;
  cfg["run_id"] = "cli-leak-smoke";
  cfg["output_dir"] = run_dir.string();
  cfg["seed"] = 11;
  cfg["target"]["builtin"] = {{"leak_per_request", 40960},
                              {"base_latency_ms", 1.0},
                              {"port", port}};
  cfg["workload"] = {{"worker_count", 2},
                     {"dispatch_interval_s", 0.02},
                     {"duration_s", 12.0}};
  cfg["analysis"] = {{"alpha", 0.05}, {"bucket_width_s", 2.0}};

  const auto result = run_cli("full " + write_config(dir.path, cfg));
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("process-rss: increasing") != std::string::npos);

  for (const char* artifact :
       {"run-manifest.json", "summary.json", "records.csv", "process_rss.csv",
        "system_memory_used.csv", "cpu_percent.csv", "io_read_bytes.csv",
        "io_write_bytes.csv", "report.txt", "report.csv", "report.json",
        "fig_memory.csv", "fig_memory.svg", "fig_response_time.csv",
        "fig_throughput.csv"}) {
    CHECK_MESSAGE(fs::exists(run_dir / artifact), artifact);
  }

  std::ifstream report_in(run_dir / "report.json");
  const auto report = nlohmann::json::parse(report_in);
  bool saw_rss = false;
  for (const auto& row : report["rows"]) {
    if (row["metric"] == "process-rss") {
      saw_rss = true;
      CHECK(row["verdict"] == "increasing");
      CHECK(row["p_value"].get<double>() < 0.05);
      CHECK(row["slope_per_second"].get<double>() > 0.0);
    }
  }
  CHECK(saw_rss);

  std::ifstream summary_in(run_dir / "summary.json");
  const auto summary = nlohmann::json::parse(summary_in);
  CHECK(summary["workload"]["total_requests"].get<std::uint64_t>() > 100);
  CHECK(summary["monitor"]["snapshot_count"].get<std::uint64_t>() >= 10);

  // re-analyze with a restricted style
  const auto t1 = run_cli("analyze " + run_dir.string() +
                          " --style paper-table-1 --bucket-width 2");
  CHECK(t1.exit_code == 0);
  CHECK(t1.output.find("process-rss") != std::string::npos);
  CHECK(t1.output.find("response-time") == std::string::npos);
}

TEST_CASE("external target without a pid still analyzes latency") {
  TempDir dir("aginglab_cli_external");
  const fs::path run_dir = dir.path / "run";
  const int port = pick_free_port();
  const int target_pid =
      spawn_child({AGING_LAB_BIN, "target", "--port", std::to_string(port),
                   "--base-latency-ms", "1"});
  bool up = false;
  for (int i = 0; i < 100 && !up; ++i) {
    up = probe("http://127.0.0.1:" + std::to_string(port) + "/healthz", 0.2);
    if (!up) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  REQUIRE(up);

  nlohmann::json cfg;
  cfg["output_dir"] = run_dir.string();
  cfg["target"]["external"]["url"] =
      "http://127.0.0.1:" + std::to_string(port) + "/work";
  cfg["workload"] = {{"worker_count", 1},
                     {"dispatch_interval_s", 0.02},
                     {"duration_s", 8.0}};
  cfg["analysis"] = {{"bucket_width_s", 2.0}};

  const auto result = run_cli("full " + write_config(dir.path, cfg));
  terminate_child(target_pid);

  CHECK(result.exit_code == 0);
  CHECK(result.output.find("insufficient-data") != std::string::npos);
  CHECK(result.output.find("response-time") != std::string::npos);

  std::ifstream report_in(run_dir / "report.json");
  const auto report = nlohmann::json::parse(report_in);
  for (const auto& row : report["rows"]) {
    if (row["metric"] == "process-rss") CHECK(row["insufficient"] == true);
    if (row["metric"] == "response-time") {
      CHECK(row["insufficient"] == false);
      CHECK(row["n"].get<int>() >= 3);
    }
  }
}
