#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "aginglab/error.hpp"

namespace httplib {
class Server;
}

namespace aginglab {

// Ground-truth aging knobs for a synthetic service. All-zero (plus a base
// latency) is the null profile used for calibration.
struct DegradationProfile {
  std::uint64_t leak_per_request = 0;      // bytes retained per /work hit
  double base_latency_ms = 0.0;
  double latency_growth_ms_per_hour = 0.0;
  double latency_jitter_ms = 0.0;          // gaussian stddev
  double sawtooth_period_s = 0.0;          // 0 = no release; otherwise the
                                           // retained store drops to 10% of
                                           // its peak once per period
  std::uint64_t seed = 1;
};

// Ground-truth memory slope in bytes/second at a given request rate.
// Defined only for the linear (non-sawtooth) profile; throws
// "no-linear-ground-truth" otherwise.
double expected_memory_slope(const DegradationProfile& profile,
                             double achieved_rate_rps);

// One gaussian draw per request, in arrival order. Same seed and request
// sequence, same latencies.
class LatencyModel {
public:
  explicit LatencyModel(const DegradationProfile& profile)
      : profile_(profile),
        rng_(profile.seed),
        jitter_(0.0, profile.latency_jitter_ms > 0.0 ? profile.latency_jitter_ms
                                                     : 1.0) {}

  double next_sleep_ms(double elapsed_hours) {
    const double jitter =
        profile_.latency_jitter_ms > 0.0 ? jitter_(rng_) : 0.0;
    const double ms = profile_.base_latency_ms +
                      profile_.latency_growth_ms_per_hour * elapsed_hours +
                      jitter;
    return ms > 0.0 ? ms : 0.0;
  }

private:
  DegradationProfile profile_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> jitter_;
};

// Retained-byte store. Chunks are filled from a seeded pseudo-random
// stream so page deduplication cannot hide them from RSS. With sawtooth
// enabled, the store is cut to 10% of its peak once per period.
class LeakStore {
public:
  LeakStore(std::uint64_t leak_per_request, double sawtooth_period_s,
            std::uint64_t seed)
      : leak_per_request_(leak_per_request),
        sawtooth_period_s_(sawtooth_period_s),
        fill_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {}

  void on_request(double elapsed_s);
  std::uint64_t retained_bytes() const { return retained_; }
  std::uint64_t peak_bytes() const { return peak_; }

private:
  std::uint64_t leak_per_request_;
  double sawtooth_period_s_;
  std::mt19937_64 fill_rng_;
  std::deque<std::vector<char>> chunks_;
  std::uint64_t retained_ = 0;
  std::uint64_t peak_ = 0;
  double last_release_t_ = 0.0;
};

// Miniature HTTP service with parameterized degradation.
//   GET /work        degrades per profile, answers 200 "ok"
//   GET /healthz     instant 200
//   GET /debug/state {"retained_bytes":..,"request_count":..,"elapsed_seconds":..}
class SyntheticTarget {
public:
  SyntheticTarget(DegradationProfile profile, int port);
  ~SyntheticTarget();

  SyntheticTarget(const SyntheticTarget&) = delete;
  SyntheticTarget& operator=(const SyntheticTarget&) = delete;

  void start();  // throws "bind-failed" when the port is taken
  void stop();

  int port() const { return port_; }
  bool running() const;
  std::uint64_t request_count() const;
  std::uint64_t retained_bytes() const;
  double elapsed_seconds() const;

private:
  void prime_allocator();
  void settle_footprint();

  DegradationProfile profile_;
  int port_;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  std::atomic<bool> ready_{false};

  mutable std::mutex state_mu_;
  LatencyModel latency_;
  LeakStore leak_;
  std::uint64_t request_count_ = 0;
  std::chrono::steady_clock::time_point start_time_;
};

}  // namespace aginglab
