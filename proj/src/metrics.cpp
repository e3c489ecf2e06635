#include "aginglab/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace aginglab {

std::string_view canonical_unit(MetricKind kind) {
  switch (kind) {
    case MetricKind::system_memory_used:
    case MetricKind::process_rss:
    case MetricKind::io_read_bytes:
    case MetricKind::io_write_bytes:
      return "bytes";
    case MetricKind::cpu_percent:
      return "percent";
    case MetricKind::response_time:
      return "milliseconds";
    case MetricKind::throughput:
      return "requests-per-hour";
  }
  return "unknown";
}

std::string_view kind_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::system_memory_used: return "system-memory-used";
    case MetricKind::process_rss: return "process-rss";
    case MetricKind::cpu_percent: return "cpu-percent";
    case MetricKind::io_read_bytes: return "io-read-bytes";
    case MetricKind::io_write_bytes: return "io-write-bytes";
    case MetricKind::response_time: return "response-time";
    case MetricKind::throughput: return "throughput";
  }
  return "unknown";
}

std::string_view kind_slug(MetricKind kind) {
  switch (kind) {
    case MetricKind::system_memory_used: return "system_memory_used";
    case MetricKind::process_rss: return "process_rss";
    case MetricKind::cpu_percent: return "cpu_percent";
    case MetricKind::io_read_bytes: return "io_read_bytes";
    case MetricKind::io_write_bytes: return "io_write_bytes";
    case MetricKind::response_time: return "response_time";
    case MetricKind::throughput: return "throughput";
  }
  return "unknown";
}

std::optional<MetricKind> kind_from_slug(std::string_view slug) {
  for (MetricKind k : kAllMetricKinds) {
    if (kind_slug(k) == slug) return k;
  }
  return std::nullopt;
}

bool TimeSeries::append(double t, double value) {
  if (!std::isfinite(t) || !std::isfinite(value) || t < 0.0 ||
      (!samples_.empty() && t <= samples_.back().t)) {
    ++rejected_;
    return false;
  }
  samples_.push_back({t, value});
  return true;
}

std::vector<double> TimeSeries::values() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.value);
  return out;
}

std::vector<double> TimeSeries::times() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.t);
  return out;
}

TimeSeries bucket_mean(const TimeSeries& series, double width_s) {
  if (!(width_s > 0.0)) throw Error("bad-bucket-width");
  TimeSeries out(series.kind(), series.run_id());
  if (series.empty()) return out;

  // samples are time-ordered, so each bucket is a contiguous range
  std::size_t i = 0;
  const auto& samples = series.samples();
  while (i < samples.size()) {
    const auto bucket = static_cast<std::int64_t>(samples[i].t / width_s);
    double sum = 0.0;
    std::size_t count = 0;
    while (i < samples.size() &&
           static_cast<std::int64_t>(samples[i].t / width_s) == bucket) {
      sum += samples[i].value;
      ++count;
      ++i;
    }
    out.append((static_cast<double>(bucket) + 0.5) * width_s,
               sum / static_cast<double>(count));
  }
  return out;
}

TimeSeries throughput_series(const std::vector<RequestRecord>& records,
                             double width_s, std::string run_id) {
  if (!(width_s > 0.0)) throw Error("bad-bucket-width");
  TimeSeries out(MetricKind::throughput, std::move(run_id));
  if (records.empty()) return out;

  double max_t = 0.0;
  for (const auto& r : records) max_t = std::max(max_t, r.dispatch_t);
  const auto last_bucket = static_cast<std::size_t>(max_t / width_s);

  std::vector<std::uint64_t> counts(last_bucket + 1, 0);
  for (const auto& r : records) {
    ++counts[static_cast<std::size_t>(r.dispatch_t / width_s)];
  }
  const double scale = 3600.0 / width_s;
  for (std::size_t k = 0; k <= last_bucket; ++k) {
    out.append((static_cast<double>(k) + 0.5) * width_s,
               static_cast<double>(counts[k]) * scale);
  }
  return out;
}

double series_mean(const TimeSeries& series) {
  if (series.empty()) throw Error("empty-series");
  double sum = 0.0;
  for (const auto& s : series.samples()) sum += s.value;
  return sum / static_cast<double>(series.size());
}

TimeSeries response_time_series(std::vector<RequestRecord> records,
                                std::string run_id) {
  std::stable_sort(records.begin(), records.end(),
                   [](const RequestRecord& a, const RequestRecord& b) {
                     return a.dispatch_t < b.dispatch_t;
                   });
  TimeSeries out(MetricKind::response_time, std::move(run_id));
  out.reserve(records.size());
  for (const auto& r : records) out.append(r.dispatch_t, r.latency_ms);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double_field(std::string_view text, const std::string& file,
                          std::size_t line_no) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error("csv-parse",
                file + ":" + std::to_string(line_no) + ": bad number '" +
                    std::string(text) + "'");
  }
  return v;
}

long parse_int_field(std::string_view text, const std::string& file,
                     std::size_t line_no) {
  long v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error("csv-parse",
                file + ":" + std::to_string(line_no) + ": bad integer '" +
                    std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

void write_series_csv(const std::filesystem::path& path,
                      const TimeSeries& series) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io-failure", "cannot open " + path.string());
  out << "t_seconds,value\n";
  for (const auto& s : series.samples()) {
    out << format_double(s.t) << ',' << format_double(s.value) << '\n';
  }
  out.flush();
  if (!out) throw Error("io-failure", "write failed for " + path.string());
}

TimeSeries read_series_csv(const std::filesystem::path& path, MetricKind kind,
                           std::string run_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-failure", "cannot open " + path.string());
  TimeSeries series(kind, std::move(run_id));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "t_seconds,value") {
        throw Error("csv-parse", path.string() + ": unexpected header '" +
                                     line + "'");
      }
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 2) {
      throw Error("csv-parse",
                  path.string() + ":" + std::to_string(line_no) +
                      ": expected 2 fields, got " +
                      std::to_string(fields.size()));
    }
    const double t = parse_double_field(fields[0], path.string(), line_no);
    const double v = parse_double_field(fields[1], path.string(), line_no);
    if (!series.append(t, v)) {
      throw Error("csv-parse", path.string() + ":" + std::to_string(line_no) +
                                   ": non-finite or non-increasing sample");
    }
  }
  return series;
}

void write_records_csv(const std::filesystem::path& path,
                       const std::vector<RequestRecord>& records) {
  CsvRecordSink sink(path);
  for (const auto& r : records) sink.append(r);
  sink.flush();
  if (sink.io_failed()) {
    throw Error("io-failure", "write failed for " + path.string());
  }
}

std::vector<RequestRecord> read_records_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-failure", "cannot open " + path.string());
  std::vector<RequestRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "dispatch_t_seconds,latency_ms,status,worker_id") {
        throw Error("csv-parse", path.string() + ": unexpected header '" +
                                     line + "'");
      }
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 4) {
      throw Error("csv-parse",
                  path.string() + ":" + std::to_string(line_no) +
                      ": expected 4 fields, got " +
                      std::to_string(fields.size()));
    }
    RequestRecord r;
    r.dispatch_t = parse_double_field(fields[0], path.string(), line_no);
    r.latency_ms = parse_double_field(fields[1], path.string(), line_no);
    r.status = static_cast<int>(parse_int_field(fields[2], path.string(), line_no));
    r.worker_id =
        static_cast<int>(parse_int_field(fields[3], path.string(), line_no));
    out.push_back(r);
  }
  return out;
}

CsvRecordSink::CsvRecordSink(const std::filesystem::path& path)
    : path_(path) {
  file_ = std::fopen(path.c_str(), "wb");
  if (!file_) throw Error("io-failure", "cannot open " + path.string());
  if (std::fputs("dispatch_t_seconds,latency_ms,status,worker_id\n", file_) < 0) {
    failed_ = true;
  }
}

CsvRecordSink::~CsvRecordSink() {
  if (file_) std::fclose(file_);
}

void CsvRecordSink::append(const RequestRecord& r) {
  char buf[160];
  char* p = buf;
  auto res = std::to_chars(p, buf + sizeof(buf), r.dispatch_t);
  p = res.ptr;
  *p++ = ',';
  res = std::to_chars(p, buf + sizeof(buf), r.latency_ms);
  p = res.ptr;
  *p++ = ',';
  res = std::to_chars(p, buf + sizeof(buf), r.status);
  p = res.ptr;
  *p++ = ',';
  res = std::to_chars(p, buf + sizeof(buf), r.worker_id);
  p = res.ptr;
  *p++ = '\n';

  std::lock_guard<std::mutex> lock(mu_);
  if (!file_ || failed_) {
    failed_ = true;
    return;
  }
  if (std::fwrite(buf, 1, static_cast<std::size_t>(p - buf), file_) !=
      static_cast<std::size_t>(p - buf)) {
    failed_ = true;
  }
}

void CsvRecordSink::flush() {
  std::lock_guard<std::mutex> lock(mu_);
  if (file_ && std::fflush(file_) != 0) failed_ = true;
}

bool CsvRecordSink::io_failed() const {
  std::lock_guard<std::mutex> lock(mu_);
  return failed_;
}

}  // namespace aginglab
