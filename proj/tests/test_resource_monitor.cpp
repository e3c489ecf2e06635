#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <thread>
#include <vector>

#include "aginglab/process_util.hpp"
#include "aginglab/resource_monitor.hpp"
#include "aginglab/trend.hpp"

using namespace aginglab;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> stub_argv(std::initializer_list<std::string> args) {
  std::vector<std::string> argv = {STUB_PROC_PATH};
  argv.insert(argv.end(), args.begin(), args.end());
  return argv;
}

const TimeSeries& series_of(const MonitorResult& r, MetricKind kind) {
  for (const auto& s : r.series) {
    if (s.kind() == kind) return s;
  }
  REQUIRE(false);
  return r.series.front();
}

}  // namespace

TEST_CASE("self sample has sane bounds") {
  const auto snap = sample_process(::getpid());
  CHECK(snap.process_rss_bytes > 0.0);
  CHECK(snap.process_rss_bytes < 64.0 * 1024 * 1024 * 1024);
  CHECK(snap.system_memory_used_bytes > 0.0);
  CHECK(snap.process_rss_bytes <= snap.system_memory_used_bytes +
                                      snap.process_rss_bytes);
  CHECK(snap.cpu_time_s >= 0.0);
  CHECK(snap.io_read_bytes >= 0.0);
  CHECK(snap.io_write_bytes >= 0.0);
  CHECK(snap.process_cpu_percent == 0.0);  // standalone sample convention
}

TEST_CASE("nonexistent pid reports process-exited") {
  CHECK_THROWS_WITH_AS(sample_process(999999999),
                       doctest::Contains("process-exited"), Error);
  CHECK_FALSE(process_alive(999999999));
  CHECK(process_alive(::getpid()));
}

TEST_CASE("allocate-and-retain stub moves rss by the allocated amount") {
  const auto ready = fs::temp_directory_path() / "aginglab_stub_ready";
  fs::remove(ready);
  const int pid = spawn_child(stub_argv({"alloc", "--mb", "100", "--after-s",
                                         "0.7", "--duration-s", "15",
                                         "--ready-file", ready.string()}));
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  const auto before = sample_process(pid);

  for (int i = 0; i < 100 && !fs::exists(ready); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  REQUIRE(fs::exists(ready));
  const auto after = sample_process(pid);

  CHECK(after.process_rss_bytes - before.process_rss_bytes >=
        90.0 * 1024 * 1024);
  terminate_child(pid);
  fs::remove(ready);
}

TEST_CASE("monitor loop cadence, counts and skew") {
  const int pid =
      spawn_child(stub_argv({"constant", "--duration-s", "30"}));
  MonitorSpec spec;
  spec.target_pid = pid;
  spec.sample_interval_s = 0.25;
  spec.duration_s = 15.0;

  const auto result = monitor_loop(spec);
  terminate_child(pid);

  CHECK(result.snapshot_count >= 58);
  CHECK(result.snapshot_count <= 61);
  CHECK_FALSE(result.target_exited_early);
  for (const auto& series : result.series) {
    CHECK(series.size() == result.snapshot_count);
    CHECK(series.rejected_count() == 0);
    for (std::size_t i = 1; i < series.size(); ++i) {
      CHECK(series.samples()[i].t > series.samples()[i - 1].t);
    }
  }

  // |gap - interval| <= 0.25 * interval for >= 95% of gaps on an idle box
  const auto& t = series_of(result, MetricKind::process_rss);
  std::size_t ok = 0, gaps = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double gap = t.samples()[i].t - t.samples()[i - 1].t;
    ++gaps;
    if (std::fabs(gap - spec.sample_interval_s) <=
        0.25 * spec.sample_interval_s) {
      ++ok;
    }
  }
  CHECK(static_cast<double>(ok) >= 0.95 * static_cast<double>(gaps));

  // cumulative io is non-decreasing
  const auto& io = series_of(result, MetricKind::io_write_bytes);
  for (std::size_t i = 1; i < io.size(); ++i) {
    CHECK(io.samples()[i].value >= io.samples()[i - 1].value);
  }

  // monitor overhead well under 2% of one core at 4 Hz
  CHECK(result.monitor_cpu_s < 0.02 * result.elapsed_s);
}

TEST_CASE("ten second monitor yields ten-ish snapshots") {
  const int pid = spawn_child(stub_argv({"constant", "--duration-s", "20"}));
  MonitorSpec spec;
  spec.target_pid = pid;
  spec.sample_interval_s = 1.0;
  spec.duration_s = 10.0;
  const auto result = monitor_loop(spec);
  terminate_child(pid);
  CHECK(result.snapshot_count >= 9);
  CHECK(result.snapshot_count <= 11);
}

TEST_CASE("early process exit is flagged and partial data kept") {
  const int pid = spawn_child(stub_argv({"constant", "--duration-s", "2"}));
  MonitorSpec spec;
  spec.target_pid = pid;
  spec.sample_interval_s = 0.5;
  spec.duration_s = 20.0;
  const auto result = monitor_loop(spec);
  wait_child_exit(pid, 2.0);
  CHECK(result.target_exited_early);
  CHECK(result.snapshot_count >= 2);
  CHECK(result.snapshot_count <= 8);

  MonitorSpec dead;
  dead.target_pid = 999999999;
  dead.sample_interval_s = 1.0;
  dead.duration_s = 5.0;
  CHECK_THROWS_WITH_AS(monitor_loop(dead), doctest::Contains("process-exited"),
                       Error);
}

TEST_CASE("leaky stub trends increasing on process rss") {
  const int pid =
      spawn_child(stub_argv({"leak", "--rate-mb-s", "1", "--duration-s", "40"}));
  MonitorSpec spec;
  spec.target_pid = pid;
  spec.sample_interval_s = 1.0;
  spec.duration_s = 30.0;
  const auto result = monitor_loop(spec);
  terminate_child(pid);

  const auto& rss = series_of(result, MetricKind::process_rss);
  REQUIRE(rss.size() >= 20);
  const auto trend = mk_test(rss, 0.05);
  CHECK(trend.verdict == Verdict::increasing);
  // ~1 MB/s retention shows up in the slope
  CHECK(trend.slope > 0.5 * 1024 * 1024);
  CHECK(trend.slope < 2.0 * 1024 * 1024);
}

TEST_CASE("constant stubs stay no-trend in at least 18 of 20 monitored runs") {
  // all twenty stubs and monitors run concurrently; they sleep almost all
  // of the time, so contention stays negligible even on one core
  constexpr int kRepeats = 20;
  std::vector<int> pids;
  for (int i = 0; i < kRepeats; ++i) {
    pids.push_back(spawn_child(stub_argv({"constant", "--duration-s", "45"})));
  }
  std::vector<MonitorResult> results(kRepeats);
  std::vector<std::thread> monitors;
  for (int i = 0; i < kRepeats; ++i) {
    monitors.emplace_back([&results, &pids, i] {
      MonitorSpec spec;
      spec.target_pid = pids[static_cast<std::size_t>(i)];
      spec.sample_interval_s = 1.0;
      spec.duration_s = 30.0;
      results[static_cast<std::size_t>(i)] = monitor_loop(spec);
    });
  }
  for (auto& m : monitors) m.join();
  for (int pid : pids) terminate_child(pid);

  int no_trend = 0;
  for (const auto& result : results) {
    const auto& rss = series_of(result, MetricKind::process_rss);
    if (rss.size() < 3) continue;
    if (mk_test(rss, 0.05).verdict == Verdict::no_trend) ++no_trend;
  }
  CHECK(no_trend >= 18);
}

TEST_CASE("find pid by exact comm name") {
  const int pid = spawn_child(stub_argv({"constant", "--duration-s", "10"}));
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  const int found = find_pid_by_name("stub_proc");
  CHECK(found > 0);
  CHECK(process_alive(found));
  CHECK(find_pid_by_name("definitely_no_such_process") == -1);
  terminate_child(pid);
}

TEST_CASE("monitor stops promptly on the stop flag") {
  const int pid = spawn_child(stub_argv({"constant", "--duration-s", "30"}));
  std::atomic<bool> stop{false};
  std::thread stopper([&stop] {
    std::this_thread::sleep_for(std::chrono::seconds(2));
    stop.store(true);
  });
  MonitorSpec spec;
  spec.target_pid = pid;
  spec.sample_interval_s = 0.5;
  spec.duration_s = 60.0;
  const auto result =
      monitor_loop(spec, std::chrono::steady_clock::now(), &stop);
  stopper.join();
  terminate_child(pid);
  CHECK(result.elapsed_s < 5.0);
  CHECK(result.snapshot_count >= 3);
}
