#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "umsim/engine.hpp"

namespace umsim {

inline constexpr const char* kTimelineHeader = "time_s,cpu_rss_bytes,gpu_used_bytes";
inline constexpr const char* kIterationsHeader = "iter,time_s,gpu_local_read_bytes,c2c_read_bytes,writeback_bytes";
inline constexpr const char* kTrafficHeader = "counter,bytes";
inline constexpr const char* kCompareHeader = "metric,report,time_s,speedup";

std::string to_json(const SimulationReport& r);
SimulationReport report_from_json(const std::string& text);
SimulationReport load_report(const std::filesystem::path& path);

std::string timeline_csv(const SimulationReport& r);
std::string iterations_csv(const SimulationReport& r);
std::string traffic_csv(const SimulationReport& r);
std::string compare_csv(const std::vector<ComparisonRow>& rows);

/// Writes report.json, timeline.csv, iterations.csv and traffic.csv.
void write_report(const SimulationReport& r, const std::filesystem::path& dir);

/// `key=value` pairs on one line: workload, allocator, total_s, amplification, migrations.
std::string summary_line(const SimulationReport& r);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

}  // namespace umsim
