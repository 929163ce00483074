#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "umsim/engine.hpp"

namespace umsim {

enum class SweepAxis : std::uint8_t { PageSize, Threshold, OversubRatio, Allocator };

std::string_view to_string(SweepAxis);
std::optional<SweepAxis> sweep_axis_from(std::string_view);

struct SweepSpec {
  SweepAxis axis = SweepAxis::PageSize;
  std::vector<std::string> values;
  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

/// A complete, self-contained run description.
///
/// File format: `[section]` headers, `key = value` lines, `#` comments.
/// Sections: machine, policy, workload, run, sweep. Unknown sections and
/// keys are errors. `workload.preset` seeds the workload from a preset before
/// the section's other keys apply, whatever their order.
struct Scenario {
  MachineConfig machine;
  PolicyConfig policy;
  WorkloadSpec workload;
  std::optional<std::string> trace_path;  // absolute once loaded
  std::optional<double> oversub_ratio;
  std::uint64_t seed = 0;
  double sampling_ms = 100;
  std::string out = "out";
  std::optional<SweepSpec> sweep;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// `base_dir` resolves a relative trace path.
Scenario parse_scenario(std::istream& in, const std::string& source, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);
/// Canonical text: every key, fixed order, presets expanded.
std::string serialize(const Scenario& s);

/// Accepts plain integers and K/M/G suffixes: k, KiB (binary), KB (decimal).
Bytes parse_bytes(const std::string& text);

/// Applies one value of a sweep axis (or one CLI override) to a copy.
Scenario with_axis_value(Scenario s, SweepAxis axis, const std::string& value);

RunOptions run_options(const Scenario& s);
SimulationReport execute(const Scenario& s);

/// `name` plus the first comment line of each *.scenario file in `dir`.
struct PresetInfo {
  std::string name;
  std::string description;
  std::filesystem::path path;
};
std::vector<PresetInfo> list_presets(const std::filesystem::path& dir);

}  // namespace umsim
