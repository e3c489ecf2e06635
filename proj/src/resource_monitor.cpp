#include "aginglab/resource_monitor.hpp"

#include <dirent.h>
#include <time.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <string>
#include <thread>

namespace aginglab {

namespace {

using Clock = std::chrono::steady_clock;

// Small fixed-buffer file slurp; procfs files are tiny and this path runs
// once a second for hours, so no iostream machinery.
bool read_small_file(const char* path, char* buf, std::size_t cap,
                     std::size_t* len) {
  FILE* f = std::fopen(path, "rb");
  if (!f) return false;
  *len = std::fread(buf, 1, cap - 1, f);
  std::fclose(f);
  buf[*len] = '\0';
  return true;
}

// Value of "Key:   12345 kB" style lines; -1 if absent.
long long meminfo_field(const char* text, const char* key) {
  const char* p = std::strstr(text, key);
  if (!p) return -1;
  p += std::strlen(key);
  while (*p == ' ' || *p == ':' || *p == '\t') ++p;
  return std::atoll(p);
}

double thread_cpu_seconds() {
  timespec ts{};
  if (clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts) != 0) return 0.0;
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

}  // namespace

namespace {

// Process state letter from /proc/<pid>/stat, or 0 when the pid is gone.
// Zombies ('Z') keep their /proc entry until reaped but have exited for
// every purpose this monitor cares about.
char proc_state(int pid) {
  char path[64];
  std::snprintf(path, sizeof(path), "/proc/%d/stat", pid);
  char buf[1024];
  std::size_t len = 0;
  if (!read_small_file(path, buf, sizeof(buf), &len)) return 0;
  const char* p = std::strrchr(buf, ')');
  if (!p) return 0;
  ++p;
  while (*p == ' ') ++p;
  return *p;
}

}  // namespace

bool process_alive(int pid) {
  const char state = proc_state(pid);
  return state != 0 && state != 'Z' && state != 'X';
}

double system_memory_used_bytes() {
  char buf[4096];
  std::size_t len = 0;
  if (!read_small_file("/proc/meminfo", buf, sizeof(buf), &len)) {
    throw Error("procfs-unavailable", "/proc/meminfo");
  }
  const long long total = meminfo_field(buf, "MemTotal");
  const long long free_kb = meminfo_field(buf, "MemFree");
  const long long buffers = meminfo_field(buf, "Buffers");
  const long long cached = meminfo_field(buf, "Cached");
  const long long sreclaim = meminfo_field(buf, "SReclaimable");
  if (total < 0 || free_kb < 0) {
    throw Error("procfs-unavailable", "meminfo fields missing");
  }
  long long used = total - free_kb - std::max(0LL, buffers) -
                   std::max(0LL, cached) - std::max(0LL, sreclaim);
  if (used < 0) used = 0;
  return static_cast<double>(used) * 1024.0;
}

ResourceSnapshot sample_process(int pid) {
  ResourceSnapshot snap;
  char path[64];
  char buf[4096];
  std::size_t len = 0;

  // RSS from statm (pages)
  std::snprintf(path, sizeof(path), "/proc/%d/statm", pid);
  if (!read_small_file(path, buf, sizeof(buf), &len)) {
    throw Error("process-exited", "pid " + std::to_string(pid));
  }
  long long size_pages = 0, resident_pages = 0;
  if (std::sscanf(buf, "%lld %lld", &size_pages, &resident_pages) != 2) {
    throw Error("process-exited", "unparseable statm for pid " + std::to_string(pid));
  }
  static const long page_size = ::sysconf(_SC_PAGESIZE);
  snap.process_rss_bytes = static_cast<double>(resident_pages) *
                           static_cast<double>(page_size);

  // utime+stime from stat; comm may contain spaces, parse after last ')'
  std::snprintf(path, sizeof(path), "/proc/%d/stat", pid);
  if (!read_small_file(path, buf, sizeof(buf), &len)) {
    throw Error("process-exited", "pid " + std::to_string(pid));
  }
  const char* after_comm = std::strrchr(buf, ')');
  if (!after_comm) {
    throw Error("process-exited", "unparseable stat for pid " + std::to_string(pid));
  }
  ++after_comm;
  {
    const char* p = after_comm;
    while (*p == ' ') ++p;
    if (*p == 'Z' || *p == 'X') {
      throw Error("process-exited",
                  "pid " + std::to_string(pid) + " is a zombie");
    }
  }
  long long utime = 0, stime = 0;
  {
    // after ')': state ppid pgrp session tty tpgid flags minflt cminflt
    // majflt cmajflt utime stime ...
    int field = 0;
    const char* p = after_comm;
    while (*p && field < 14) {
      while (*p == ' ') ++p;
      ++field;
      if (field == 12) utime = std::atoll(p);
      if (field == 13) stime = std::atoll(p);
      while (*p && *p != ' ') ++p;
    }
  }
  static const long ticks_per_s = ::sysconf(_SC_CLK_TCK);
  snap.cpu_time_s = static_cast<double>(utime + stime) /
                    static_cast<double>(ticks_per_s);

  // cumulative I/O; may be absent on restricted kernels, reported as 0
  std::snprintf(path, sizeof(path), "/proc/%d/io", pid);
  if (read_small_file(path, buf, sizeof(buf), &len)) {
    const long long rb = meminfo_field(buf, "read_bytes");
    const long long wb = meminfo_field(buf, "write_bytes");
    snap.io_read_bytes = rb > 0 ? static_cast<double>(rb) : 0.0;
    snap.io_write_bytes = wb > 0 ? static_cast<double>(wb) : 0.0;
  }

  snap.system_memory_used_bytes = system_memory_used_bytes();
  return snap;
}

MonitorResult monitor_loop(
    const MonitorSpec& spec, Clock::time_point origin,
    const std::atomic<bool>* stop,
    const std::function<void(const ResourceSnapshot&)>& on_snapshot) {
  if (!(spec.sample_interval_s > 0.0)) throw Error("bad-sample-interval");
  if (!process_alive(spec.target_pid)) {
    throw Error("process-exited", "pid " + std::to_string(spec.target_pid));
  }

  MonitorResult result;
  const auto expected =
      spec.sample_interval_s > 0.0
          ? static_cast<std::size_t>(spec.duration_s / spec.sample_interval_s) + 2
          : 0;
  result.series.assign(
      {TimeSeries(MetricKind::system_memory_used),
       TimeSeries(MetricKind::process_rss), TimeSeries(MetricKind::cpu_percent),
       TimeSeries(MetricKind::io_read_bytes),
       TimeSeries(MetricKind::io_write_bytes)});
  for (auto& s : result.series) s.reserve(expected);

  const double cpu_at_start = thread_cpu_seconds();
  ResourceSnapshot prev;
  bool have_prev = false;

  for (std::size_t k = 0;; ++k) {
    const double target_t = static_cast<double>(k) * spec.sample_interval_s;
    if (target_t >= spec.duration_s) break;
    if (stop && stop->load()) break;
    std::this_thread::sleep_until(
        origin + std::chrono::duration_cast<Clock::duration>(
                     std::chrono::duration<double>(target_t)));
    if (stop && stop->load()) break;

    ResourceSnapshot snap;
    try {
      snap = sample_process(spec.target_pid);
    } catch (const Error& e) {
      if (e.code() == "process-exited") {
        result.target_exited_early = true;
        break;
      }
      throw;
    }
    snap.t = std::chrono::duration<double>(Clock::now() - origin).count();
    if (have_prev) {
      const double dt = snap.t - prev.t;
      if (dt > 0.0) {
        snap.process_cpu_percent =
            std::max(0.0, 100.0 * (snap.cpu_time_s - prev.cpu_time_s) / dt);
      }
    }

    result.series[0].append(snap.t, snap.system_memory_used_bytes);
    result.series[1].append(snap.t, snap.process_rss_bytes);
    result.series[2].append(snap.t, snap.process_cpu_percent);
    result.series[3].append(snap.t, snap.io_read_bytes);
    result.series[4].append(snap.t, snap.io_write_bytes);
    ++result.snapshot_count;
    if (on_snapshot) on_snapshot(snap);

    prev = snap;
    have_prev = true;
  }

  result.monitor_cpu_s = thread_cpu_seconds() - cpu_at_start;
  result.elapsed_s = std::chrono::duration<double>(Clock::now() - origin).count();
  return result;
}

int find_pid_by_name(const std::string& name) {
  DIR* dir = ::opendir("/proc");
  if (!dir) return -1;
  int found = -1;
  while (dirent* entry = ::readdir(dir)) {
    if (!std::isdigit(static_cast<unsigned char>(entry->d_name[0]))) continue;
    char path[288];
    std::snprintf(path, sizeof(path), "/proc/%s/comm", entry->d_name);
    char buf[64];
    std::size_t len = 0;
    if (!read_small_file(path, buf, sizeof(buf), &len)) continue;
    if (len > 0 && buf[len - 1] == '\n') buf[len - 1] = '\0';
    if (name == buf) {
      found = std::atoi(entry->d_name);
      break;
    }
  }
  ::closedir(dir);
  return found;
}

}  // namespace aginglab
