#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "umsim/memmodel.hpp"
#include "umsim/types.hpp"

namespace umsim {

struct BufferSpec {
  AllocKind kind = AllocKind::System;
  Bytes length = 0;
  friend bool operator==(const BufferSpec&, const BufferSpec&) = default;
};

struct AccessPattern {
  enum class Kind : std::uint8_t { Regular, Irregular, Mixed };
  Kind kind = Kind::Regular;
  Bytes stride = 8;
  double density = 1.0;     // irregular/mixed: fraction of pages in the hot set
  std::uint64_t seed = 0;   // irregular/mixed: selects the hot set
  friend bool operator==(const AccessPattern&, const AccessPattern&) = default;
};

std::string_view to_string(AccessPattern::Kind);

struct WorkloadSpec {
  std::string name = "custom";
  std::vector<BufferSpec> buffers;
  Agent init_side = Agent::Cpu;
  AccessPattern pattern;
  std::uint32_t iterations = 1;
  double reuse = 1.0;
  Bytes access_size = 8;
  std::uint32_t write_every = 0;  // every k-th compute access is a write; 0 = read-only

  void validate() const;
  /// Sum of buffer lengths rounded to the 2 MiB GPU page: the footprint the
  /// workload would occupy if fully GPU-resident.
  Bytes footprint(const MachineConfig& cfg) const;
  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

/// Where a buffer landed once allocated.
struct BufferLayout {
  Addr base = 0;
  Bytes length = 0;
  Bytes page_size = 0;
};

struct ByteRange {
  Bytes offset = 0;  // relative to the buffer base
  Bytes length = 0;
};

/// Lazy, deterministic event stream for a WorkloadSpec.
///
/// Init touches every page of every buffer once (one write of access_size at
/// the page start) from init_side. Each compute iteration covers a rotating
/// window of ceil(reuse × pages) pages per buffer, starting at
/// (iteration × window) mod pages:
///   Regular   ascending sweep of the window at `stride`
///   Irregular fixed hot set (density, pattern seed), window over the hot
///             set, visited in an order shuffled by the run seed; each page
///             is swept at `stride`
///   Mixed     even iterations regular, odd iterations irregular
class WorkloadStream {
 public:
  WorkloadStream(WorkloadSpec spec, std::vector<BufferLayout> layout, std::uint64_t seed);

  std::optional<AccessEvent> next();

  /// Byte ranges of `buffer` touched by compute iteration `iteration`.
  std::vector<ByteRange> window(std::size_t buffer, std::uint32_t iteration) const;
  /// Irregular hot set of `buffer`, ascending page indices.
  const std::vector<std::uint64_t>& hot_pages(std::size_t buffer) const { return hot_[buffer]; }

  const WorkloadSpec& spec() const { return spec_; }

 private:
  struct Segment {
    Addr begin;
    Addr end;
    Addr buffer_end;
    Bytes page_size;
  };
  bool irregular_iteration(std::uint32_t it) const;
  void plan_iteration(std::uint32_t it);
  std::vector<std::uint64_t> window_pages(std::size_t buffer, std::uint32_t it) const;

  WorkloadSpec spec_;
  std::vector<BufferLayout> layout_;
  std::uint64_t seed_;
  std::vector<std::vector<std::uint64_t>> hot_;

  enum class Stage : std::uint8_t { Init, Compute, Done } stage_ = Stage::Init;
  std::size_t buf_ = 0;
  std::uint64_t page_ = 0;
  std::uint32_t iter_ = 0;
  std::vector<Segment> plan_;
  std::size_t seg_ = 0;
  Addr cursor_ = 0;
  std::uint64_t compute_count_ = 0;
};

/// Materializes the whole stream; for tests and small workloads.
std::vector<AccessEvent> gen_workload(const WorkloadSpec& spec, const std::vector<BufferLayout>& layout,
                                      std::uint64_t seed);

/// Layout the engine's bump allocator will produce for `spec` on a fresh
/// machine (no earlier allocations).
std::vector<BufferLayout> predicted_layout(const WorkloadSpec& spec, const MachineConfig& cfg);

// Presets: memory-shape analogs of the benchmark applications. Footprints are
// approximations; one event stands for a coalesced 1 KiB request.
inline constexpr Bytes kPresetAccess = 1 * KiB;
inline constexpr Bytes kSradIterationBytes = 1'500'000'000;

Bytes statevector_bytes(unsigned n_qubits);
WorkloadSpec srad_like(Bytes working_set = kSradIterationBytes, std::uint32_t iterations = 12);
WorkloadSpec hotspot_like(Bytes working_set, std::uint32_t iterations);
WorkloadSpec qiskit_like(unsigned n_qubits, std::uint32_t iterations);
WorkloadSpec bfs_like(Bytes graph_bytes, std::uint32_t iterations);
WorkloadSpec needle_like(Bytes working_set, std::uint32_t iterations);
WorkloadSpec pathfinder_like(Bytes working_set, std::uint32_t iterations);

struct OversubscriptionSetup {
  Bytes reserved_bytes = 0;
  Bytes m_peak = 0;
  Bytes m_gpu = 0;
  double r_oversub = 0;
  friend bool operator==(const OversubscriptionSetup&, const OversubscriptionSetup&) = default;
};

/// Sizes a DeviceOnly reservation so m_peak / m_gpu matches target_ratio to
/// within one GPU page. Throws ConfigError when the ratio is unattainable.
OversubscriptionSetup setup_oversubscription(double target_ratio, Bytes m_peak, const MachineConfig& cfg);
/// No reservation: the ratio the footprint naturally produces.
OversubscriptionSetup natural_oversubscription(Bytes m_peak, const MachineConfig& cfg);

struct Trace {
  std::vector<AccessEvent> events;
  std::vector<std::size_t> lines;  // 1-based source line of each event
};

/// Text trace: one `agent,op,hex_addr,size,phase_tag` per line, `#` starts a
/// comment. Throws ParseError citing the line.
Trace load_trace(const std::string& path);
Trace parse_trace(std::istream& in, const std::string& source_name);
void write_trace(std::ostream& out, const std::vector<AccessEvent>& events);
PhaseTag parse_phase_tag(const std::string& text);

// Deterministic helpers shared by the generators.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

}  // namespace umsim
