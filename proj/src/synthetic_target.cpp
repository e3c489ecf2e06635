#include "aginglab/synthetic_target.hpp"

#include <httplib.h>

#include <cstring>

#include <json.hpp>

namespace aginglab {

double expected_memory_slope(const DegradationProfile& profile,
                             double achieved_rate_rps) {
  if (achieved_rate_rps < 0.0) throw Error("bad-rate");
  if (profile.sawtooth_period_s > 0.0) throw Error("no-linear-ground-truth");
  return static_cast<double>(profile.leak_per_request) * achieved_rate_rps;
}

void LeakStore::on_request(double elapsed_s) {
  if (leak_per_request_ > 0) {
    std::vector<char> chunk(leak_per_request_);
    // fill from the PRNG stream, 8 bytes at a time
    std::size_t i = 0;
    while (i + 8 <= chunk.size()) {
      const std::uint64_t word = fill_rng_();
      std::memcpy(chunk.data() + i, &word, 8);
      i += 8;
    }
    for (; i < chunk.size(); ++i) {
      chunk[i] = static_cast<char>(fill_rng_());
    }
    retained_ += chunk.size();
    chunks_.push_back(std::move(chunk));
    peak_ = std::max(peak_, retained_);
  }
  if (sawtooth_period_s_ > 0.0 &&
      elapsed_s - last_release_t_ >= sawtooth_period_s_) {
    const std::uint64_t floor_bytes = peak_ / 10;
    while (retained_ > floor_bytes && !chunks_.empty()) {
      retained_ -= chunks_.front().size();
      chunks_.pop_front();
    }
    last_release_t_ = elapsed_s;
  }
}

SyntheticTarget::SyntheticTarget(DegradationProfile profile, int port)
    : profile_(profile),
      port_(port),
      server_(std::make_unique<httplib::Server>()),
      latency_(profile),
      leak_(profile.leak_per_request, profile.sawtooth_period_s,
            profile.seed) {
  if (profile_.sawtooth_period_s < 0.0) throw Error("bad-profile");
  if (profile_.base_latency_ms < 0.0) throw Error("bad-profile");
  if (profile_.latency_jitter_ms < 0.0) throw Error("bad-profile");

  server_->Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    if (ready_.load()) {
      res.set_content("ok", "text/plain");
    } else {
      res.status = 503;
      res.set_content("warming", "text/plain");
    }
  });

  server_->Get("/work", [this](const httplib::Request&, httplib::Response& res) {
    double sleep_ms = 0.0;
    {
      std::lock_guard<std::mutex> lock(state_mu_);
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start_time_)
              .count();
      sleep_ms = latency_.next_sleep_ms(elapsed / 3600.0);
      leak_.on_request(elapsed);
      ++request_count_;
    }
    if (sleep_ms > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(sleep_ms));
    }
    res.set_content("ok", "text/plain");
  });

  server_->Get("/debug/state",
               [this](const httplib::Request&, httplib::Response& res) {
                 nlohmann::json state;
                 {
                   std::lock_guard<std::mutex> lock(state_mu_);
                   state["retained_bytes"] = leak_.retained_bytes();
                   state["request_count"] = request_count_;
                   state["elapsed_seconds"] =
                       std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start_time_)
                           .count();
                 }
                 res.set_content(state.dump(), "application/json");
               });

  // startup-only: holds a pool thread long enough for the warmup barrage
  // to touch every thread's stack and arena before readiness
  server_->Get("/debug/warmup",
               [](const httplib::Request&, httplib::Response& res) {
                 std::this_thread::sleep_for(std::chrono::milliseconds(25));
                 res.set_content("warm", "text/plain");
               });
}

SyntheticTarget::~SyntheticTarget() { stop(); }

void SyntheticTarget::prime_allocator() {
  // Exercise the real serving path over more concurrent connections than
  // any plausible worker count before declaring readiness. The first
  // request on each pool thread otherwise materializes a malloc arena or
  // stack page minutes into a run, and a single late +4 KiB step reads
  // as a memory trend against an otherwise flat footprint.
  auto barrage = [this](const char* path, int clients, int rounds) {
    std::vector<std::thread> warmers;
    for (int w = 0; w < clients; ++w) {
      warmers.emplace_back([this, path, rounds] {
        httplib::Client cli("127.0.0.1", port_);
        cli.set_connection_timeout(5, 0);
        cli.set_read_timeout(60, 0);
        cli.set_keep_alive(true);
        for (int round = 0; round < rounds; ++round) {
          auto res = cli.Get(path);
          (void)res;
        }
      });
    }
    for (auto& t : warmers) t.join();
  };
  // held requests force every pool thread to serve at least once
  barrage("/debug/warmup", 24, 2);
  // then the actual endpoints, over persistent connections like a driver
  barrage("/work", 16, 3);
  barrage("/healthz", 4, 2);
  barrage("/debug/state", 4, 2);
}

void SyntheticTarget::start() {
  // REUSEADDR only: two targets silently sharing a port (REUSEPORT, the
  // httplib default) would split the workload and corrupt an experiment
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR,
               reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  if (!server_->bind_to_port("0.0.0.0", port_)) {
    throw Error("bind-failed", "port " + std::to_string(port_) + " busy");
  }
  {
    std::lock_guard<std::mutex> lock(state_mu_);
    start_time_ = std::chrono::steady_clock::now();
  }
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  for (int i = 0; i < 500 && !server_->is_running(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  if (!server_->is_running()) throw Error("bind-failed", "listener never came up");
  prime_allocator();
  settle_footprint();
  // warmup must leave no trace: rebuild the deterministic state so the
  // jitter stream, leak accounting and clock all start fresh
  {
    std::lock_guard<std::mutex> lock(state_mu_);
    latency_ = LatencyModel(profile_);
    leak_ = LeakStore(profile_.leak_per_request, profile_.sawtooth_period_s,
                      profile_.seed);
    request_count_ = 0;
    start_time_ = std::chrono::steady_clock::now();
  }
  ready_.store(true);  // /healthz goes 200 only now
}

void SyntheticTarget::settle_footprint() {
  // warmup thread teardown releases stack pages asynchronously; hold
  // readiness until our own rss stops moving so the monitor never sees
  // startup settling as a trend
  auto rss_now = [] {
    FILE* f = std::fopen("/proc/self/statm", "rb");
    if (!f) return -1L;
    long size = 0, resident = 0;
    const int got = std::fscanf(f, "%ld %ld", &size, &resident);
    std::fclose(f);
    return got == 2 ? resident : -1L;
  };
  // the post-warmup decay arrives in sub-second steps for a few seconds;
  // only a multi-second flat horizon is real evidence of steady state
  long prev = rss_now();
  int stable = 0;
  for (int i = 0; i < 60 && stable < 12; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(250));
    const long cur = rss_now();
    stable = (cur == prev) ? stable + 1 : 0;
    prev = cur;
  }
}

void SyntheticTarget::stop() {
  if (server_ && server_->is_running()) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

bool SyntheticTarget::running() const { return server_ && server_->is_running(); }

std::uint64_t SyntheticTarget::request_count() const {
  std::lock_guard<std::mutex> lock(state_mu_);
  return request_count_;
}

std::uint64_t SyntheticTarget::retained_bytes() const {
  std::lock_guard<std::mutex> lock(state_mu_);
  return leak_.retained_bytes();
}

double SyntheticTarget::elapsed_seconds() const {
  std::lock_guard<std::mutex> lock(state_mu_);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start_time_)
      .count();
}

}  // namespace aginglab
