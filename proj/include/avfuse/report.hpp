#pragma once

#include <optional>
#include <string>
#include <vector>

#include "avfuse/canonical_json.hpp"
#include "avfuse/simulation.hpp"

namespace avfuse {

inline constexpr const char* kReportSchema = "avfuse/run-report";
inline constexpr int kReportSchemaVersion = 1;

struct ReportMeta {
  std::string label;
  std::string mode;
  std::optional<Json> scenario;  // normalized scenario; null for an empty replay
  std::uint64_t seed = 0;
};

ReportMeta meta_for(const RunResult& r, std::string label);

/// Metric names in report and CSV order.
const std::vector<std::string>& metric_names();

Json metrics_json(const MetricsSummary& m);
Json report_json(const RunResult& r, const ReportMeta& meta);

/// One canonical JSON line per ego track frame.
std::string tracks_jsonl(const RunResult& r);

/// Header plus one row per report. Null metrics are empty cells.
std::string metrics_csv(const std::vector<Json>& reports);

/// Throws kSchema describing the first problem.
void validate_report(const Json& report);
void validate_tracks_jsonl(const std::string& text);
void validate_metrics_csv(const std::string& text);

/// Bus frames as stored in a report.
std::vector<BusRecord> bus_records_from_report(const Json& report);
/// Track frames as stored in a report.
std::vector<Json> track_frames_from_report(const Json& report);

/// Human-readable table: each metric for every run and its delta against the first run.
std::string compare_table(const std::vector<Json>& reports);

/// Single-line machine-readable summary printed by `run` and `replay`.
std::string summary_line(const Json& report);

}  // namespace avfuse
