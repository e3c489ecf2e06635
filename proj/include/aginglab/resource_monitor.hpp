#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <vector>

#include "aginglab/metrics.hpp"

namespace aginglab {

// One point-in-time reading of the target process and the host.
// cpu_time_s is cumulative (utime+stime); process_cpu_percent is the
// delta against the previous snapshot and 0 for a standalone first
// sample.
struct ResourceSnapshot {
  double t = 0.0;
  double system_memory_used_bytes = 0.0;
  double process_rss_bytes = 0.0;
  double process_cpu_percent = 0.0;
  double io_read_bytes = 0.0;   // cumulative
  double io_write_bytes = 0.0;  // cumulative
  double cpu_time_s = 0.0;      // cumulative
};

struct MonitorSpec {
  int target_pid = 0;
  double sample_interval_s = 1.0;
  double duration_s = 0.0;
};

struct MonitorResult {
  std::vector<TimeSeries> series;  // one per sampled MetricKind
  std::size_t snapshot_count = 0;
  bool target_exited_early = false;
  double monitor_cpu_s = 0.0;  // CPU burned by the sampling thread itself
  double elapsed_s = 0.0;
};

// Reads the process accounting interface (/proc). Throws "process-exited"
// when the pid is gone. A standalone sample reports process_cpu_percent
// as 0; monitor_loop fills it from consecutive cpu_time_s deltas.
ResourceSnapshot sample_process(int pid);

// "used" as total minus free minus buffers/cache (incl. reclaimable
// slab), matching what `free` calls used.
double system_memory_used_bytes();

// Samples at spec cadence until the duration elapses, the process exits
// (target_exited_early), or stop is raised. Snapshots are also handed to
// on_snapshot as they are taken so callers can stream them to disk.
MonitorResult monitor_loop(
    const MonitorSpec& spec,
    std::chrono::steady_clock::time_point origin =
        std::chrono::steady_clock::now(),
    const std::atomic<bool>* stop = nullptr,
    const std::function<void(const ResourceSnapshot&)>& on_snapshot = {});

// Exact match against /proc/<pid>/comm (kernel-truncated to 15 chars).
// Returns -1 when nothing matches.
int find_pid_by_name(const std::string& name);

bool process_alive(int pid);

}  // namespace aginglab
