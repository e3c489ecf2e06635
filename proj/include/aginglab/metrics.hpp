#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aginglab/error.hpp"

namespace aginglab {

// Metric kinds tracked by the lab. Each kind has exactly one canonical
// unit; unit conversion happens at render time only.
enum class MetricKind {
  system_memory_used,  // bytes
  process_rss,         // bytes
  cpu_percent,         // percent of one core
  io_read_bytes,       // bytes, cumulative
  io_write_bytes,      // bytes, cumulative
  response_time,       // milliseconds
  throughput,          // requests per hour
};

inline constexpr MetricKind kAllMetricKinds[] = {
    MetricKind::system_memory_used, MetricKind::process_rss,
    MetricKind::cpu_percent,        MetricKind::io_read_bytes,
    MetricKind::io_write_bytes,     MetricKind::response_time,
    MetricKind::throughput,
};

std::string_view canonical_unit(MetricKind kind);
std::string_view kind_name(MetricKind kind);  // "process-rss" (display)
std::string_view kind_slug(MetricKind kind);  // "process_rss" (file names)
std::optional<MetricKind> kind_from_slug(std::string_view slug);

struct MetricSample {
  double t = 0.0;      // elapsed seconds since run start
  double value = 0.0;  // canonical unit of the series' kind
};

// One metric's timestamped samples. Sample times are strictly increasing
// and all values finite; append() enforces both and counts rejects so
// monitor glitches stay visible instead of silently vanishing.
class TimeSeries {
public:
  TimeSeries() = default;
  explicit TimeSeries(MetricKind kind, std::string run_id = {})
      : kind_(kind), run_id_(std::move(run_id)) {}

  bool append(double t, double value);
  bool append(const MetricSample& s) { return append(s.t, s.value); }

  MetricKind kind() const { return kind_; }
  const std::string& run_id() const { return run_id_; }
  const std::vector<MetricSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t rejected_count() const { return rejected_; }

  const MetricSample& front() const { return samples_.front(); }
  const MetricSample& back() const { return samples_.back(); }

  std::vector<double> values() const;
  std::vector<double> times() const;

  void reserve(std::size_t n) { samples_.reserve(n); }

private:
  MetricKind kind_ = MetricKind::process_rss;
  std::string run_id_;
  std::vector<MetricSample> samples_;
  std::size_t rejected_ = 0;
};

// One request observed by the load driver.
struct RequestRecord {
  double dispatch_t = 0.0;  // seconds since run start
  double latency_ms = 0.0;  // dispatch to last byte
  int status = 0;           // HTTP status; 0 = transport failure/timeout
  int worker_id = 0;
};

// Mean-aggregates into buckets [k*width, (k+1)*width); one output sample
// per non-empty bucket, placed at the bucket midpoint. Empty input gives
// empty output.
TimeSeries bucket_mean(const TimeSeries& series, double width_s);

// Requests-per-hour series: one sample per bucket covering [0, max
// dispatch time], value = count * 3600 / width. Zero-count buckets are
// kept; an hour with no traffic is a real observation.
TimeSeries throughput_series(const std::vector<RequestRecord>& records,
                             double width_s, std::string run_id = {});

double series_mean(const TimeSeries& series);  // throws "empty-series"

// Per-request latency as a response-time series, ordered by dispatch
// time. Records with colliding dispatch times are counted as rejected by
// the strict-ordering rule.
TimeSeries response_time_series(std::vector<RequestRecord> records,
                                std::string run_id = {});

// --- CSV persistence -------------------------------------------------
// Series files: header "t_seconds,value". Records files: header
// "dispatch_t_seconds,latency_ms,status,worker_id". UTF-8, \n endings,
// doubles rendered shortest-round-trip so re-ingestion is lossless.

std::string format_double(double v);

void write_series_csv(const std::filesystem::path& path,
                      const TimeSeries& series);
TimeSeries read_series_csv(const std::filesystem::path& path, MetricKind kind,
                           std::string run_id = {});

void write_records_csv(const std::filesystem::path& path,
                       const std::vector<RequestRecord>& records);
std::vector<RequestRecord> read_records_csv(const std::filesystem::path& path);

// Record consumers. The load driver's workers append concurrently; every
// implementation must serialize internally.
class RecordSink {
public:
  virtual ~RecordSink() = default;
  virtual void append(const RequestRecord& record) = 0;
};

// Streams records straight to a records CSV; nothing is buffered beyond
// the stream's own fixed buffer, so the sink's footprint stays flat for
// arbitrarily long runs.
class CsvRecordSink final : public RecordSink {
public:
  explicit CsvRecordSink(const std::filesystem::path& path);
  void append(const RequestRecord& record) override;
  void flush();
  bool io_failed() const;

private:
  mutable std::mutex mu_;
  std::filesystem::path path_;
  FILE* file_ = nullptr;
  bool failed_ = false;

public:
  ~CsvRecordSink() override;
};

class VectorRecordSink final : public RecordSink {
public:
  void append(const RequestRecord& record) override {
    std::lock_guard<std::mutex> lock(mu_);
    records_.push_back(record);
  }
  std::vector<RequestRecord> take() {
    std::lock_guard<std::mutex> lock(mu_);
    return std::move(records_);
  }
  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return records_.size();
  }

private:
  mutable std::mutex mu_;
  std::vector<RequestRecord> records_;
};

}  // namespace aginglab
