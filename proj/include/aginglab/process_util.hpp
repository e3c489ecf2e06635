#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace aginglab {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Raises the malloc trim/mmap thresholds so the allocator neither returns
// pages mid-run nor mmaps transient blocks; without this, one stray
// trim or mmap step mid-run reads as a trend.
void pin_allocator_thresholds();

// Pre-touches and frees a scratch arena so ordinary steady-state
// allocations reuse existing pages instead of growing RSS one page at a
// time. Callers whose footprint is supposed to grow (leaking targets)
// must skip this: the preheated arena would absorb the first megabytes
// of the signal.
void preheat_allocator_arena();

// Both of the above. For processes that must hold a flat RSS for hours:
// a harness that grows its own RSS during a run shows up in its own
// detector.
void stabilize_process_footprint();

std::string self_exe_path();

// fork+exec; argv[0] is the program path. Returns the child pid, throws
// "spawn-failed" on error. The child's stdout/stderr go to /dev/null when
// quiet is set, or to the named log file in the second overload.
int spawn_child(const std::vector<std::string>& argv, bool quiet = true);
int spawn_child(const std::vector<std::string>& argv,
                const std::string& output_file);

// True if the child exited (status filled), false if still running after
// timeout_s of polling.
bool wait_child_exit(int pid, double timeout_s, int* status = nullptr);

// SIGTERM, grace period, then SIGKILL; reaps the child.
void terminate_child(int pid, double grace_s = 5.0);

// Binds an ephemeral listener to discover a currently-free TCP port.
int pick_free_port();

std::string utc_timestamp();  // ISO 8601, second resolution

}  // namespace aginglab
