#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "umsim/memmodel.hpp"
#include "umsim/xconnect.hpp"

namespace umsim {

enum class EvictionPolicy : std::uint8_t { Lru };

struct PrefetchDirective {
  enum class When : std::uint8_t { BeforeCompute, EachIteration };
  std::size_t buffer = 0;
  Tier dest = Tier::Gpu;
  When when = When::BeforeCompute;
  friend bool operator==(const PrefetchDirective&, const PrefetchDirective&) = default;
};

struct PolicyConfig {
  /// Replaces the kind of every System/Managed workload buffer when set.
  std::optional<AllocKind> allocator;
  std::uint32_t migration_threshold = 256;
  bool counters_enabled = true;
  EvictionPolicy eviction = EvictionPolicy::Lru;
  bool prefetch_after_first_touch = false;
  Bytes first_touch_prefetch_chunk = 2 * MiB;
  Bytes managed_migration_granularity = 2 * MiB;
  /// 0 means "the machine's system page size"; no other value is supported.
  Bytes counter_tracking_granularity = 0;
  std::vector<PrefetchDirective> prefetch;

  void validate(const MachineConfig& cfg) const;
  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

struct MigrationEvent {
  enum class Cause : std::uint8_t { OnDemandFault, AccessCounterNotification, ExplicitPrefetch, Eviction };
  Cause cause = Cause::OnDemandFault;
  std::uint64_t first_vpn = 0;  // in system pages
  std::uint64_t pages = 0;      // covered range, not all of it necessarily moved
  Direction direction = Direction::H2D;
  Bytes bytes = 0;              // bytes actually moved
  Tick tick = 0;
  Seconds time = 0;

  friend bool operator==(const MigrationEvent&, const MigrationEvent&) = default;
};

std::string_view to_string(MigrationEvent::Cause);

struct PolicyStats {
  std::uint64_t cpu_faults = 0;
  std::uint64_t gpu_first_touch_faults = 0;  // System pages, serviced through the CPU
  std::uint64_t managed_gpu_faults = 0;
  std::uint64_t notifications = 0;
  std::uint64_t evictions = 0;
  std::uint64_t pressure_remote_accesses = 0;  // evicted managed pages read over C2C
  friend bool operator==(const PolicyStats&, const PolicyStats&) = default;
};

/// Placement and migration decisions for one simulation.
///
/// System pages: first touch maps to the toucher's tier (CPU fallback when
/// the GPU is full), GPU accesses to CPU-resident pages go over the link and
/// bump the page's access counter; crossing the threshold migrates the
/// covering 2 MiB region.
/// Managed pages: a GPU fault pulls the whole 2 MiB chunk to the GPU,
/// evicting LRU chunks first. Evicted pages come back one system page at a
/// time, or are read remotely while the GPU stays full.
class Policy {
 public:
  Policy(MemorySystem& mem, PolicyConfig pol, TrafficCounters& traffic, std::vector<MigrationEvent>& log);

  /// Starts a new logical step (one access, one prefetch chunk, ...).
  Tick advance() { return ++tick_; }
  Tick tick() const { return tick_; }
  void set_time(Seconds now) { now_ = now; }

  Seconds handle_first_touch(PageRef page, Agent toucher);
  /// GPU access to a CPU-resident managed page. The page may remain on the
  /// CPU afterwards (evicted page, no free GPU memory).
  Seconds on_gpu_access_managed(PageRef page);
  /// Called after a GPU access to a CPU-resident System page was serviced
  /// remotely; maintains the access counter.
  Seconds on_gpu_access_system(PageRef page);

  struct PageRange {
    AllocId alloc;
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;  // exclusive
    bool contains(PageRef p) const { return p.alloc == alloc && p.index >= lo && p.index < hi; }
  };
  /// Evicts least-recently-touched GPU-resident units (managed chunks, System
  /// pages) until `bytes_needed` fits. Pages in `protect` are never chosen.
  /// Throws OutOfMemory when nothing evictable is left.
  Seconds evict_for(Bytes bytes_needed, std::optional<PageRange> protect = std::nullopt);
  /// Makes [offset, offset+length) of the allocation resident at `dest`.
  Seconds prefetch(AllocId alloc, Bytes offset, Bytes length, Tier dest);

  const PolicyConfig& config() const { return pol_; }
  const PolicyStats& stats() const { return stats_; }

 private:
  PageRange chunk_of(PageRef page, Bytes granularity) const;
  Seconds managed_chunk_fault(PageRef page);
  Seconds managed_evicted_fault(PageRef page);
  Seconds first_touch_prefetch(PageRef page);
  void emit(MigrationEvent::Cause cause, const VirtualAllocation& a, std::uint64_t lo, std::uint64_t hi,
            Direction dir, Bytes bytes);

  MemorySystem& mem_;
  PolicyConfig pol_;
  TrafficCounters& traffic_;
  std::vector<MigrationEvent>& log_;
  PolicyStats stats_;
  Tick tick_ = 0;
  Seconds now_ = 0;
};

}  // namespace umsim
