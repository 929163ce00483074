#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "umsim/memmodel.hpp"
#include "umsim/policy.hpp"
#include "umsim/workload.hpp"
#include "umsim/xconnect.hpp"

namespace umsim {

struct PhaseTimings {
  Seconds t_alloc = 0;
  Seconds t_init = 0;
  Seconds t_compute = 0;
  Seconds t_dealloc = 0;
  std::vector<Seconds> per_iteration;

  Seconds total() const { return t_alloc + t_init + t_compute + t_dealloc; }
  friend bool operator==(const PhaseTimings&, const PhaseTimings&) = default;
};

struct IterationTraffic {
  Bytes gpu_local_read = 0;
  Bytes c2c_read = 0;  // access-driven remote reads, migrations excluded
  Bytes writeback = 0;
  friend bool operator==(const IterationTraffic&, const IterationTraffic&) = default;
};

struct MemoryUsageSample {
  Seconds time = 0;
  Bytes cpu_rss = 0;
  Bytes gpu_used = 0;  // includes gpu_reserved_baseline
  Bytes mapped = 0;    // all mapped pages across tiers, for conservation checks
  friend bool operator==(const MemoryUsageSample&, const MemoryUsageSample&) = default;
};

/// Where the logical time went. Sums to timings.total().
struct ElapsedBreakdown {
  Seconds access = 0;
  Seconds policy = 0;  // faults, notifications, migrations, evictions, prefetch
  Seconds allocation = 0;
  Seconds deallocation = 0;
  Seconds context_init = 0;

  Seconds sum() const { return access + policy + allocation + deallocation + context_init; }
  friend bool operator==(const ElapsedBreakdown&, const ElapsedBreakdown&) = default;
};

struct SimulationReport {
  std::string workload;     // workload or trace name
  std::string fingerprint;  // identifies the event source; compare() requires a match
  std::string allocator;    // effective kind of the first buffer
  MachineConfig machine;
  PolicyConfig policy;
  std::optional<OversubscriptionSetup> oversubscription;
  std::uint64_t seed = 0;
  Seconds sampling_period = 0.1;

  PhaseTimings timings;
  Seconds setup_s = 0;  // reservation allocation, outside total time
  TrafficCounters traffic;
  std::vector<IterationTraffic> per_iteration_traffic;
  std::vector<MigrationEvent> migrations;
  PolicyStats stats;
  ElapsedBreakdown breakdown;
  std::vector<MemoryUsageSample> timeline;
  std::uint64_t events = 0;
  Bytes footprint = 0;

  /// Approximate L1<->L2 throughput: bytes serviced to the GPU (local and
  /// remote) per second of compute time.
  double l2_throughput() const;

  friend bool operator==(const SimulationReport&, const SimulationReport&) = default;
};

/// Passed to RunOptions::observer after every access event.
struct StepView {
  std::size_t index;
  const AccessEvent& event;
  const AccessResolution& resolution;
  AllocKind kind;
  const MemorySystem& memory;
  Seconds now;
};

struct RunOptions {
  MachineConfig machine;
  PolicyConfig policy;
  std::optional<double> oversub_ratio;
  std::uint64_t seed = 0;
  Seconds sampling_period = 0.1;
  std::function<void(const StepView&)> observer;
};

/// Generates the workload stream and simulates it.
SimulationReport run(const WorkloadSpec& spec, const RunOptions& opts);

/// Simulates recorded events against `buffers`, allocated in order with the
/// same bump layout as a generated workload (first buffer at 0x100000000).
SimulationReport run_trace(const std::vector<AccessEvent>& events, const std::vector<BufferSpec>& buffers,
                           const RunOptions& opts, const std::string& name = "trace");

std::string fingerprint(const WorkloadSpec& spec);
std::string fingerprint(const std::vector<AccessEvent>& events, const std::vector<BufferSpec>& buffers);

struct ComparisonRow {
  std::string metric;  // total, alloc, init, compute, dealloc, iter:N
  std::size_t report = 0;
  Seconds time = 0;
  double speedup = 1.0;  // baseline time / this time
};

/// Report 0 is the baseline. Throws UsageError on fewer than two reports or
/// mismatched fingerprints.
std::vector<ComparisonRow> compare(const std::vector<SimulationReport>& reports);

}  // namespace umsim
