#include <doctest.h>

#include <httplib.h>

#include <json.hpp>

#include "aginglab/process_util.hpp"
#include "aginglab/resource_monitor.hpp"
#include "aginglab/synthetic_target.hpp"

#include <unistd.h>

using namespace aginglab;

TEST_CASE("expected memory slope ground truth") {
  DegradationProfile leaky;
  leaky.leak_per_request = 1024;
  CHECK(expected_memory_slope(leaky, 100.0) == doctest::Approx(102400.0));

  DegradationProfile clean;
  CHECK(expected_memory_slope(clean, 500.0) == 0.0);

  DegradationProfile sawtooth;
  sawtooth.leak_per_request = 1024;
  sawtooth.sawtooth_period_s = 60.0;
  CHECK_THROWS_WITH_AS(expected_memory_slope(sawtooth, 10.0),
                       "no-linear-ground-truth", Error);
  CHECK_THROWS_AS(expected_memory_slope(leaky, -1.0), Error);
}

TEST_CASE("latency model follows the linear growth line") {
  DegradationProfile profile;
  profile.base_latency_ms = 5.0;
  profile.latency_growth_ms_per_hour = 3600.0;  // 1 ms per second
  LatencyModel model(profile);
  CHECK(model.next_sleep_ms(0.0) == doctest::Approx(5.0));
  // 10 minutes in: +600 ms
  CHECK(model.next_sleep_ms(600.0 / 3600.0) == doctest::Approx(605.0));
}

TEST_CASE("latency model draws are reproducible per seed and never negative") {
  DegradationProfile profile;
  profile.base_latency_ms = 1.0;
  profile.latency_jitter_ms = 5.0;
  profile.seed = 42;

  LatencyModel a(profile);
  LatencyModel b(profile);
  bool clamped_seen = false;
  for (int i = 0; i < 2000; ++i) {
    const double da = a.next_sleep_ms(0.1);
    const double db = b.next_sleep_ms(0.1);
    CHECK(da == db);
    CHECK(da >= 0.0);
    if (da == 0.0) clamped_seen = true;
  }
  // with stddev 5 around mean 1 the clamp must fire sometimes
  CHECK(clamped_seen);

  auto other_seed = profile;
  other_seed.seed = 43;
  LatencyModel c(profile);
  LatencyModel d(other_seed);
  int differing = 0;
  for (int i = 0; i < 100; ++i) {
    if (c.next_sleep_ms(0.1) != d.next_sleep_ms(0.1)) ++differing;
  }
  // many draws clamp to 0 under both seeds; unclamped ones must differ
  CHECK(differing > 50);
}

TEST_CASE("leak store accounting is exact and sawtooth releases to the floor") {
  LeakStore store(1000, 0.0, 9);
  for (int i = 0; i < 250; ++i) store.on_request(static_cast<double>(i));
  CHECK(store.retained_bytes() == 250000);
  CHECK(store.peak_bytes() == 250000);

  LeakStore saw(1000, 10.0, 9);
  for (int i = 0; i < 9; ++i) saw.on_request(static_cast<double>(i));
  CHECK(saw.retained_bytes() == 9000);
  saw.on_request(10.0);  // crosses the period boundary
  CHECK(saw.retained_bytes() <= saw.peak_bytes() / 10);
  const auto after_release = saw.retained_bytes();
  saw.on_request(10.5);
  CHECK(saw.retained_bytes() == after_release + 1000);
}

TEST_CASE("target serves work, health and debug state") {
  DegradationProfile profile;
  profile.leak_per_request = 1024;
  profile.base_latency_ms = 0.0;
  const int port = pick_free_port();
  SyntheticTarget target(profile, port);
  target.start();

  httplib::Client cli("127.0.0.1", port);
  cli.set_keep_alive(true);

  auto health = cli.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);

  for (int i = 0; i < 1000; ++i) {
    auto res = cli.Get("/work");
    REQUIRE(res);
    CHECK(res->status == 200);
  }

  auto state = cli.Get("/debug/state");
  REQUIRE(state);
  auto doc = nlohmann::json::parse(state->body);
  CHECK(doc["request_count"].get<std::uint64_t>() == 1000);
  CHECK(doc["retained_bytes"].get<std::uint64_t>() == 1024u * 1000u);
  CHECK(doc["elapsed_seconds"].get<double>() > 0.0);

  CHECK(target.request_count() == 1000);
  CHECK(target.retained_bytes() == 1024u * 1000u);
  target.stop();
}

TEST_CASE("leak shows up in the serving process's rss") {
  // run the target in its own process, the deployment shape the monitor
  // sees: its rss then reflects retention without client-side churn
  const int port = pick_free_port();
  const int pid = spawn_child({AGING_LAB_BIN, "target", "--port",
                               std::to_string(port), "--leak-bytes", "1024"});
  httplib::Client cli("127.0.0.1", port);
  cli.set_keep_alive(true);
  bool up = false;
  for (int i = 0; i < 100 && !up; ++i) {
    if (auto res = cli.Get("/healthz"); res && res->status == 200) {
      up = true;
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  }
  REQUIRE(up);

  // settle the server's own steady-state allocations first
  for (int i = 0; i < 200; ++i) cli.Get("/work");
  const double before = sample_process(pid).process_rss_bytes;
  for (int i = 0; i < 1000; ++i) {
    auto res = cli.Get("/work");
    REQUIRE(res);
  }
  const double after = sample_process(pid).process_rss_bytes;
  CHECK(after - before >= 1000000.0);

  terminate_child(pid);
}

TEST_CASE("constant profile serves within its latency window") {
  DegradationProfile profile;
  profile.base_latency_ms = 5.0;
  const int port = pick_free_port();
  SyntheticTarget target(profile, port);
  target.start();

  httplib::Client cli("127.0.0.1", port);
  cli.set_keep_alive(true);
  for (int i = 0; i < 20; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    auto res = cli.Get("/work");
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    REQUIRE(res);
    CHECK(ms >= 4.5);    // the handler sleeps the full base latency
    CHECK(ms <= 100.0);  // generous scheduling slack
  }
  target.stop();
}

TEST_CASE("second bind on the same port fails cleanly") {
  DegradationProfile profile;
  const int port = pick_free_port();
  SyntheticTarget first(profile, port);
  first.start();

  SyntheticTarget second(profile, port);
  CHECK_THROWS_WITH_AS(second.start(), doctest::Contains("bind-failed"),
                       Error);
  first.stop();
}
