#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aginglab/metrics.hpp"
#include "aginglab/trend.hpp"

namespace aginglab {

// One analyzed metric. Canonical-unit fields (bytes/s etc.) feed
// machine consumers; the *_display fields are unit-converted for tables
// (bytes -> GB, slope per hour) and always travel with their unit string.
struct MetricRow {
  MetricKind metric = MetricKind::process_rss;
  std::size_t n = 0;
  bool insufficient = false;  // n < 3, no statistics computed

  double mean_canonical = 0.0;
  double slope_per_second = 0.0;
  double ci_low_per_second = 0.0;
  double ci_high_per_second = 0.0;

  double mean_display = 0.0;
  double slope_per_hour_display = 0.0;
  double ci_low_per_hour_display = 0.0;
  double ci_high_per_hour_display = 0.0;
  std::string mean_unit;
  std::string slope_unit;

  double p_value = 1.0;
  Verdict verdict = Verdict::no_trend;
};

struct AgingReport {
  std::string run_id;
  double alpha = 0.05;
  double bucket_width_s = 60.0;
  std::string response_time_mode = "bucketed";  // or "raw"
  std::string generated_at;  // run start stamp from the manifest, so
                             // re-analysis is byte-identical
  std::string memory_note;
  std::vector<MetricRow> rows;
};

enum class TableStyle { paper_table_1, paper_table_2, paper_table_3, full };

struct AnalyzeOptions {
  double alpha = 0.05;
  double bucket_width_s = 60.0;
  bool response_time_raw = false;  // default: bucket means per bucket_width
  SlopeOptions slope;
};

// Analyzes every series found in a run directory: memory/CPU/IO series
// raw, response time per the configured mode, throughput derived from the
// records file. Throws "no-series-found" for a directory with nothing to
// analyze and propagates csv-parse errors naming the offending file.
AgingReport analyze_run(const std::filesystem::path& run_dir,
                        const AnalyzeOptions& opts = {});

// Aligned plain-text table. Styles mirror the usual aging-report layouts:
// 1 = memory p/slope, 2 = response-time p/slope, 3 = mean/slope/CI for
// memory and response time, full = everything. A style asking for a
// metric the report lacks renders a footnote instead of failing.
std::string render_table(const AgingReport& report, TableStyle style);
std::string render_table_csv(const AgingReport& report, TableStyle style);

// Plot-ready data per figure family (memory, response time, throughput):
// a two-column CSV (t_hours,value) plus an SVG line chart. Returns the
// written paths.
std::vector<std::filesystem::path> emit_plot_data(
    const AgingReport& report, const std::filesystem::path& run_dir);

// report.txt / report.csv / report.json under the run directory.
void write_report_artifacts(const AgingReport& report,
                            const std::filesystem::path& run_dir);

std::string report_to_json_text(const AgingReport& report);

TableStyle table_style_from_name(const std::string& name);  // throws "bad-style"

// Formatting helpers (stable contract for the table renderings).
std::string format_mean(double v);  // fixed, 2 decimals
std::string format_stat(double v);  // engineering e-3 style below 1, fixed-4 above
std::string format_p(double p);     // "~0" below 1e-15

}  // namespace aginglab
