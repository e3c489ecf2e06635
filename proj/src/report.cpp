#include "aginglab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace aginglab {

namespace {

constexpr const char* kMemoryNote =
    "used memory = MemTotal - MemFree - Buffers - Cached - SReclaimable";

struct DisplayUnit {
  double scale;  // canonical -> display
  const char* mean_unit;
  const char* slope_unit;
};

DisplayUnit display_unit(MetricKind kind) {
  switch (kind) {
    case MetricKind::system_memory_used:
    case MetricKind::process_rss:
    case MetricKind::io_read_bytes:
    case MetricKind::io_write_bytes:
      return {1e-9, "GB", "GB/h"};
    case MetricKind::cpu_percent:
      return {1.0, "%", "%/h"};
    case MetricKind::response_time:
      return {1.0, "ms", "ms/h"};
    case MetricKind::throughput:
      return {1.0, "req/h", "req/h per h"};
  }
  return {1.0, "", ""};
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return std::string(buf);
}

MetricRow make_row(const TimeSeries& series, const AnalyzeOptions& opts) {
  MetricRow row;
  row.metric = series.kind();
  row.n = series.size();
  const DisplayUnit unit = display_unit(series.kind());
  row.mean_unit = unit.mean_unit;
  row.slope_unit = unit.slope_unit;

  if (series.size() < 3) {
    row.insufficient = true;
    return row;
  }
  row.mean_canonical = series_mean(series);
  const TrendResult trend = mk_test(series, opts.alpha, opts.slope);
  row.p_value = trend.p_value;
  row.verdict = trend.verdict;
  row.slope_per_second = trend.slope;
  row.ci_low_per_second = trend.slope_ci_low;
  row.ci_high_per_second = trend.slope_ci_high;

  row.mean_display = row.mean_canonical * unit.scale;
  row.slope_per_hour_display = trend.slope * 3600.0 * unit.scale;
  row.ci_low_per_hour_display = trend.slope_ci_low * 3600.0 * unit.scale;
  row.ci_high_per_hour_display = trend.slope_ci_high * 3600.0 * unit.scale;
  return row;
}

struct LoadedRun {
  std::map<MetricKind, TimeSeries> series;
  std::vector<RequestRecord> records;
  bool has_records = false;
};

LoadedRun load_run_dir(const std::filesystem::path& dir,
                       const AnalyzeOptions& opts) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw Error("no-series-found", dir.string() + " is not a directory");
  }
  LoadedRun run;
  for (MetricKind kind : kAllMetricKinds) {
    const fs::path p = dir / (std::string(kind_slug(kind)) + ".csv");
    if (fs::exists(p)) {
      run.series.emplace(kind, read_series_csv(p, kind));
    }
  }
  const fs::path records_path = dir / "records.csv";
  if (fs::exists(records_path)) {
    run.records = read_records_csv(records_path);
    run.has_records = true;
  }
  if (run.series.empty() && !run.has_records) {
    throw Error("no-series-found", dir.string());
  }

  if (run.has_records) {
    // response time and throughput are derived from the raw records;
    // derived series win over stale CSVs from a previous analysis
    TimeSeries rt = response_time_series(run.records);
    if (!opts.response_time_raw) {
      rt = bucket_mean(rt, opts.bucket_width_s);
    }
    run.series[MetricKind::response_time] = std::move(rt);
    run.series[MetricKind::throughput] =
        throughput_series(run.records, opts.bucket_width_s);
  } else if (auto it = run.series.find(MetricKind::response_time);
             it != run.series.end() && !opts.response_time_raw) {
    it->second = bucket_mean(it->second, opts.bucket_width_s);
  }
  return run;
}

std::string manifest_field(const std::filesystem::path& dir,
                           const std::string& key) {
  const auto path = dir / "run-manifest.json";
  std::ifstream in(path);
  if (!in) return {};
  try {
    nlohmann::json manifest = nlohmann::json::parse(in);
    if (manifest.contains(key) && manifest[key].is_string()) {
      return manifest[key].get<std::string>();
    }
  } catch (const nlohmann::json::exception&) {
    // manifest is optional metadata; a bad one should not block analysis
  }
  return {};
}

const MetricRow* find_row(const AgingReport& report, MetricKind kind) {
  for (const auto& row : report.rows) {
    if (row.metric == kind) return &row;
  }
  return nullptr;
}

// Column-aligned rendering of a cell matrix.
std::string align(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> widths;
  for (const auto& row : cells) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c];
      if (c + 1 < row.size()) {
        out.append(widths[c] - row[c].size() + 2, ' ');
      }
    }
    out += '\n';
  }
  return out;
}

std::string ci_string(const MetricRow& row) {
  return "[" + format_stat(row.ci_low_per_hour_display) + " " +
         format_stat(row.ci_high_per_hour_display) + "]";
}

std::vector<std::string> p_slope_cells(const MetricRow& row) {
  if (row.insufficient) {
    return {std::string(kind_name(row.metric)), "insufficient-data", "-"};
  }
  return {std::string(kind_name(row.metric)), format_p(row.p_value),
          format_stat(row.slope_per_hour_display) + " " + row.slope_unit};
}

std::vector<std::string> mean_slope_ci_cells(const MetricRow& row) {
  if (row.insufficient) {
    return {std::string(kind_name(row.metric)), "insufficient-data", "-", "-"};
  }
  return {std::string(kind_name(row.metric)), format_mean(row.mean_display),
          format_stat(row.slope_per_hour_display) + " " + row.slope_unit,
          ci_string(row)};
}

constexpr MetricKind kMemoryKinds[] = {MetricKind::system_memory_used,
                                       MetricKind::process_rss};

}  // namespace

std::string format_mean(double v) { return fixed(v, 2); }

std::string format_stat(double v) {
  if (v == 0.0) return "0";
  const double mag = std::fabs(v);
  if (mag >= 1.0) return fixed(v, 4);

  int exponent = 0;
  double mantissa = v;
  while (std::fabs(mantissa) < 1.0) {
    mantissa *= 1000.0;
    exponent -= 3;
  }
  std::string text = fixed(mantissa, 4);
  // rounding can push the mantissa to 1000.0000; renormalize
  if (text == "1000.0000" || text == "-1000.0000") {
    mantissa /= 1000.0;
    exponent += 3;
    text = fixed(mantissa, 4);
  }
  if (exponent == 0) return text;
  return text + "e" + std::to_string(exponent);
}

std::string format_p(double p) {
  if (p < 1e-15) return "~0";
  if (p >= 0.1) return fixed(p, 4);
  int exponent = 0;
  double mantissa = p;
  while (mantissa < 1.0) {
    mantissa *= 1000.0;
    exponent -= 3;
  }
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", mantissa);
  return std::string(buf) + "e" + std::to_string(exponent);
}

AgingReport analyze_run(const std::filesystem::path& run_dir,
                        const AnalyzeOptions& opts) {
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw Error("bad-alpha");
  if (!(opts.bucket_width_s > 0.0)) throw Error("bad-bucket-width");

  const LoadedRun run = load_run_dir(run_dir, opts);

  AgingReport report;
  report.alpha = opts.alpha;
  report.bucket_width_s = opts.bucket_width_s;
  report.response_time_mode = opts.response_time_raw ? "raw" : "bucketed";
  report.memory_note = kMemoryNote;
  report.generated_at = manifest_field(run_dir, "started_at_utc");
  report.run_id = manifest_field(run_dir, "run_id");
  if (report.run_id.empty()) report.run_id = run_dir.filename().string();

  for (MetricKind kind : kAllMetricKinds) {
    auto it = run.series.find(kind);
    if (it == run.series.end()) continue;
    report.rows.push_back(make_row(it->second, opts));
  }
  return report;
}

std::string render_table(const AgingReport& report, TableStyle style) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> footnotes;

  auto note_missing = [&](MetricKind kind) {
    footnotes.push_back("note: no " + std::string(kind_name(kind)) +
                        " series in this report");
  };

  switch (style) {
    case TableStyle::paper_table_1: {
      cells.push_back({"Metric", "p-value", "Slope"});
      bool any = false;
      for (MetricKind kind : kMemoryKinds) {
        if (const MetricRow* row = find_row(report, kind)) {
          cells.push_back(p_slope_cells(*row));
          any = true;
        }
      }
      if (!any) note_missing(MetricKind::system_memory_used);
      break;
    }
    case TableStyle::paper_table_2: {
      cells.push_back({"Metric", "p-value", "Slope"});
      if (const MetricRow* row = find_row(report, MetricKind::response_time)) {
        cells.push_back(p_slope_cells(*row));
      } else {
        note_missing(MetricKind::response_time);
      }
      break;
    }
    case TableStyle::paper_table_3: {
      cells.push_back({"Metric", "Mean", "Slope", "Confidence Interval"});
      bool any_mem = false;
      for (MetricKind kind : kMemoryKinds) {
        if (const MetricRow* row = find_row(report, kind)) {
          cells.push_back(mean_slope_ci_cells(*row));
          any_mem = true;
        }
      }
      if (!any_mem) note_missing(MetricKind::system_memory_used);
      if (const MetricRow* row = find_row(report, MetricKind::response_time)) {
        cells.push_back(mean_slope_ci_cells(*row));
      } else {
        note_missing(MetricKind::response_time);
      }
      break;
    }
    case TableStyle::full: {
      cells.push_back({"Metric", "n", "Mean", "p-value", "Slope",
                       "Confidence Interval", "Verdict"});
      for (const auto& row : report.rows) {
        if (row.insufficient) {
          cells.push_back({std::string(kind_name(row.metric)),
                           std::to_string(row.n), "-", "-", "-", "-",
                           "insufficient-data"});
          continue;
        }
        cells.push_back(
            {std::string(kind_name(row.metric)), std::to_string(row.n),
             format_mean(row.mean_display) + " " + row.mean_unit,
             format_p(row.p_value),
             format_stat(row.slope_per_hour_display) + " " + row.slope_unit,
             ci_string(row), std::string(verdict_name(row.verdict))});
      }
      break;
    }
  }

  std::string out = align(cells);
  for (const auto& note : footnotes) {
    out += note;
    out += '\n';
  }
  return out;
}

std::string render_table_csv(const AgingReport& report, TableStyle style) {
  std::ostringstream out;
  auto emit_line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << fields[i];
    }
    out << '\n';
  };

  if (style == TableStyle::full) {
    emit_line({"metric", "n", "mean", "mean_unit", "p_value", "slope_per_hour",
               "slope_unit", "ci_low_per_hour", "ci_high_per_hour", "verdict"});
    for (const auto& row : report.rows) {
      if (row.insufficient) {
        emit_line({std::string(kind_name(row.metric)), std::to_string(row.n),
                   "", row.mean_unit, "", "", row.slope_unit, "", "",
                   "insufficient-data"});
        continue;
      }
      emit_line({std::string(kind_name(row.metric)), std::to_string(row.n),
                 format_double(row.mean_display), row.mean_unit,
                 format_double(row.p_value),
                 format_double(row.slope_per_hour_display), row.slope_unit,
                 format_double(row.ci_low_per_hour_display),
                 format_double(row.ci_high_per_hour_display),
                 std::string(verdict_name(row.verdict))});
    }
    return out.str();
  }

  emit_line({"metric", "mean", "p_value", "slope_per_hour", "slope_unit",
             "ci_low_per_hour", "ci_high_per_hour"});
  auto emit_row = [&](const MetricRow& row) {
    if (row.insufficient) {
      emit_line({std::string(kind_name(row.metric)), "", "", "",
                 row.slope_unit, "", ""});
      return;
    }
    emit_line({std::string(kind_name(row.metric)),
               format_double(row.mean_display), format_double(row.p_value),
               format_double(row.slope_per_hour_display), row.slope_unit,
               format_double(row.ci_low_per_hour_display),
               format_double(row.ci_high_per_hour_display)});
  };
  if (style == TableStyle::paper_table_1) {
    for (MetricKind kind : kMemoryKinds) {
      if (const MetricRow* row = find_row(report, kind)) emit_row(*row);
    }
  } else if (style == TableStyle::paper_table_2) {
    if (const MetricRow* row = find_row(report, MetricKind::response_time)) {
      emit_row(*row);
    }
  } else {
    for (MetricKind kind : kMemoryKinds) {
      if (const MetricRow* row = find_row(report, kind)) emit_row(*row);
    }
    if (const MetricRow* row = find_row(report, MetricKind::response_time)) {
      emit_row(*row);
    }
  }
  return out.str();
}

namespace {

void write_plot_csv(const std::filesystem::path& path,
                    const TimeSeries& series) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io-failure", "cannot open " + path.string());
  out << "t_hours,value\n";
  for (const auto& s : series.samples()) {
    out << format_double(s.t / 3600.0) << ',' << format_double(s.value)
        << '\n';
  }
}

void write_line_chart(const std::filesystem::path& path,
                      const std::string& title, const std::string& y_label,
                      const TimeSeries& series) {
  constexpr int kW = 800, kH = 480;
  constexpr int kLeft = 90, kRight = 24, kTop = 40, kBottom = 56;
  const int plot_w = kW - kLeft - kRight;
  const int plot_h = kH - kTop - kBottom;

  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  if (!series.empty()) {
    x_min = series.front().t / 3600.0;
    x_max = series.back().t / 3600.0;
    y_min = y_max = series.front().value;
    for (const auto& s : series.samples()) {
      y_min = std::min(y_min, s.value);
      y_max = std::max(y_max, s.value);
    }
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;

  auto sx = [&](double t_hours) {
    return kLeft + (t_hours - x_min) / (x_max - x_min) * plot_w;
  };
  auto sy = [&](double v) {
    return kTop + plot_h - (v - y_min) / (y_max - y_min) * plot_h;
  };
  auto num = [](double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return std::string(buf);
  };

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io-failure", "cannot open " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH
      << "\">\n";
  out << "<rect width=\"" << kW << "\" height=\"" << kH
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << title
      << "</text>\n";
  // axes
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\""
      << kLeft + plot_w << "\" y2=\"" << kTop + plot_h
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n";
  // ticks
  for (int i = 0; i <= 5; ++i) {
    const double tx = x_min + (x_max - x_min) * i / 5.0;
    const double px = sx(tx);
    out << "<line x1=\"" << px << "\" y1=\"" << kTop + plot_h << "\" x2=\""
        << px << "\" y2=\"" << kTop + plot_h + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px << "\" y=\"" << kTop + plot_h + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << num(tx) << "</text>\n";
    const double ty = y_min + (y_max - y_min) * i / 5.0;
    const double py = sy(ty);
    out << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py << "\" x2=\""
        << kLeft << "\" y2=\"" << py << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kLeft - 8 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << num(ty) << "</text>\n";
  }
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kH - 14
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\">time (hours)</text>\n";
  out << "<text x=\"18\" y=\"" << kTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\" transform=\"rotate(-90 18 " << kTop + plot_h / 2
      << ")\">" << y_label << "</text>\n";

  if (!series.empty()) {
    out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.2\" "
        << "points=\"";
    for (const auto& s : series.samples()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(s.t / 3600.0),
                    sy(s.value));
      out << buf;
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace

std::vector<std::filesystem::path> emit_plot_data(
    const AgingReport& report, const std::filesystem::path& run_dir) {
  AnalyzeOptions opts;
  opts.alpha = report.alpha;
  opts.bucket_width_s = report.bucket_width_s;
  opts.response_time_raw = report.response_time_mode == "raw";
  const LoadedRun run = load_run_dir(run_dir, opts);

  std::vector<std::filesystem::path> written;
  auto emit_family = [&](const char* stem, const TimeSeries& series,
                         const std::string& title) {
    const auto csv = run_dir / (std::string(stem) + ".csv");
    const auto svg = run_dir / (std::string(stem) + ".svg");
    write_plot_csv(csv, series);
    write_line_chart(svg, title,
                     std::string(canonical_unit(series.kind())), series);
    written.push_back(csv);
    written.push_back(svg);
  };

  const TimeSeries* memory = nullptr;
  if (auto it = run.series.find(MetricKind::system_memory_used);
      it != run.series.end()) {
    memory = &it->second;
  } else if (auto it2 = run.series.find(MetricKind::process_rss);
             it2 != run.series.end()) {
    memory = &it2->second;
  }
  if (memory) {
    emit_family("fig_memory", *memory,
                "Memory consumption (" + report.run_id + ")");
  }
  if (auto it = run.series.find(MetricKind::response_time);
      it != run.series.end()) {
    emit_family("fig_response_time", it->second,
                "Response time (" + report.run_id + ")");
  }
  if (auto it = run.series.find(MetricKind::throughput);
      it != run.series.end()) {
    emit_family("fig_throughput", it->second,
                "Throughput (" + report.run_id + ")");
  }
  return written;
}

std::string report_to_json_text(const AgingReport& report) {
  nlohmann::json doc;
  doc["run_id"] = report.run_id;
  doc["alpha"] = report.alpha;
  doc["bucket_width_s"] = report.bucket_width_s;
  doc["response_time_mode"] = report.response_time_mode;
  doc["generated_at"] = report.generated_at;
  doc["memory_note"] = report.memory_note;
  doc["rows"] = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json j;
    j["metric"] = std::string(kind_name(row.metric));
    j["n"] = row.n;
    j["insufficient"] = row.insufficient;
    j["mean"] = row.mean_display;
    j["mean_unit"] = row.mean_unit;
    j["mean_canonical"] = row.mean_canonical;
    j["canonical_unit"] = std::string(canonical_unit(row.metric));
    j["p_value"] = row.p_value;
    j["slope_per_hour"] = row.slope_per_hour_display;
    j["slope_unit"] = row.slope_unit;
    j["ci_low_per_hour"] = row.ci_low_per_hour_display;
    j["ci_high_per_hour"] = row.ci_high_per_hour_display;
    j["slope_per_second"] = row.slope_per_second;
    j["ci_low_per_second"] = row.ci_low_per_second;
    j["ci_high_per_second"] = row.ci_high_per_second;
    j["verdict"] = std::string(verdict_name(row.verdict));
    doc["rows"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

void write_report_artifacts(const AgingReport& report,
                            const std::filesystem::path& run_dir) {
  {
    std::ofstream out(run_dir / "report.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io-failure", "cannot open report.txt");
    out << "aging report: " << report.run_id << "\n";
    out << "alpha: " << format_double(report.alpha)
        << "  bucket-width: " << format_double(report.bucket_width_s)
        << " s  response-time mode: " << report.response_time_mode << "\n";
    if (!report.generated_at.empty()) {
      out << "run started: " << report.generated_at << "\n";
    }
    out << report.memory_note << "\n";
    out << "slope units are per hour of run time\n\n";
    out << render_table(report, TableStyle::full);
  }
  {
    std::ofstream out(run_dir / "report.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io-failure", "cannot open report.csv");
    out << render_table_csv(report, TableStyle::full);
  }
  {
    std::ofstream out(run_dir / "report.json", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io-failure", "cannot open report.json");
    out << report_to_json_text(report);
  }
}

TableStyle table_style_from_name(const std::string& name) {
  if (name == "paper-table-1") return TableStyle::paper_table_1;
  if (name == "paper-table-2") return TableStyle::paper_table_2;
  if (name == "paper-table-3") return TableStyle::paper_table_3;
  if (name == "full") return TableStyle::full;
  throw Error("bad-style", name);
}

}  // namespace aginglab
