#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "umsim/types.hpp"

namespace umsim {

/// Hardware parameters of the two-tier machine. Defaults follow a Grace
/// Hopper node: LPDDR5X behind the CPU, HBM3 behind the GPU, NVLink-C2C
/// between them. Cost fields are per page or per event in seconds.
struct MachineConfig {
  Bytes cpu_capacity = 480 * GiB;
  Bytes gpu_capacity = 96 * GiB;
  Bytes gpu_reserved_baseline = 600 * MiB;

  double cpu_bw = 486e9;
  double gpu_bw = 3.4e12;
  double c2c_bw_h2d = 375e9;
  double c2c_bw_d2h = 297e9;
  Seconds c2c_latency = 1e-6;

  Bytes cpu_cacheline = 64;
  Bytes gpu_cacheline = 128;
  Bytes system_page_size = 64 * KiB;
  Bytes gpu_page_size = 2 * MiB;

  Seconds fault_cost_cpu = 1e-6;
  Seconds fault_cost_gpu_first_touch = 8e-6;
  Seconds pte_teardown_cost = 0.5e-6;
  Seconds migration_fixed_cost = 20e-6;
  Seconds notification_cost = 10e-6;

  Seconds pte_create_cost = 0.02e-6;
  Seconds gpu_fault_cost = 20e-6;
  Seconds gpu_context_init_cost = 5e-3;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  friend bool operator==(const MachineConfig&, const MachineConfig&) = default;
};

struct AllocId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(AllocId, AllocId) = default;
};

enum class FirstToucher : std::uint8_t { None, Cpu, Gpu };

struct PageTableEntry {
  std::uint64_t vpn = 0;
  Residency residency = Residency::Unmapped;
  OwnerTable owner_table = OwnerTable::SystemWide;
  std::uint32_t access_counter = 0;
  bool dirty = false;
  // Managed page pushed out of GPU memory by eviction; lives in the
  // system-wide table at system page size until it returns.
  bool evicted = false;
  FirstToucher first_touch_agent = FirstToucher::None;
  Tick last_touch = 0;
};

struct VirtualAllocation {
  AllocId id;
  Addr base = 0;
  Bytes length = 0;
  AllocKind kind = AllocKind::System;
  Bytes page_size_in_use = 0;

  std::uint64_t page_count() const { return length / page_size_in_use; }
  Addr end() const { return base + length; }
  bool contains(Addr a) const { return a >= base && a < end(); }
};

struct PageRef {
  AllocId alloc;
  std::uint64_t index = 0;
  friend constexpr bool operator==(PageRef, PageRef) = default;
};

struct TierUsage {
  Bytes cpu_resident_bytes = 0;
  Bytes gpu_resident_bytes = 0;  // includes gpu_reserved_baseline
};

struct Translation {
  enum class Outcome : std::uint8_t { Hit, FirstTouchFault, NotAllocated };
  Outcome outcome = Outcome::NotAllocated;
  Residency residency = Residency::Unmapped;
  std::optional<PageRef> page;
};

/// Count of live PTEs per page table and residency; used in diagnostics.
struct ResidencyCensus {
  std::uint64_t unmapped = 0;
  std::uint64_t cpu = 0;
  std::uint64_t gpu = 0;
  std::uint64_t system_wide_entries = 0;
  std::uint64_t gpu_exclusive_entries = 0;
  std::string describe() const;
};

/// Physical tiers plus every live allocation's page table entries.
///
/// Virtual addresses come from a bump allocator starting at 0x1_0000_0000;
/// every base is aligned to gpu_page_size so managed chunks and
/// access-counter regions never straddle two allocations. An allocation's
/// PTEs all use its page_size_in_use (system page size, or gpu_page_size for
/// DeviceOnly); which page table holds a PTE is tracked by owner_table.
class MemorySystem {
 public:
  static constexpr Addr kVirtualBase = 0x1'0000'0000ULL;
  static constexpr Addr kReservationBase = 0x4000'0000'0000ULL;

  explicit MemorySystem(MachineConfig cfg);

  const MachineConfig& config() const { return cfg_; }

  struct Allocated {
    VirtualAllocation alloc;
    Seconds elapsed = 0;
  };
  /// Creates PTEs for `length` bytes rounded up to the page size. System and
  /// Managed PTEs start Unmapped; DeviceOnly/HostPinned pages are mapped
  /// eagerly and charged fault_cost_cpu each.
  /// `fixed_base` places the allocation outside the bump sequence (used for
  /// the oversubscription reservation so workload addresses do not shift).
  Allocated allocate(AllocKind kind, Bytes length, std::optional<Addr> fixed_base = std::nullopt);
  /// Destroys every PTE and releases resident bytes; elapsed is
  /// pages × pte_teardown_cost.
  Seconds deallocate(AllocId id);

  Translation translate(Addr addr, Agent requester) const;

  /// First-touch mapping of an Unmapped page. Throws CapacityError when the
  /// tier has no room for one more page.
  void map_page(PageRef page, Tier tier, Agent toucher);
  /// Moves a mapped page between tiers (migration or eviction). Resets the
  /// access counter and fixes the owner table.
  void move_page(PageRef page, Tier dest);

  const VirtualAllocation& allocation(AllocId id) const;
  bool is_live(AllocId id) const;
  std::vector<AllocId> live_allocations() const;

  PageTableEntry& pte(PageRef page);
  const PageTableEntry& pte(PageRef page) const;
  std::span<PageTableEntry> ptes(AllocId id);
  std::span<const PageTableEntry> ptes(AllocId id) const;

  std::optional<PageRef> locate(Addr addr) const;
  Addr page_addr(PageRef page) const;

  TierUsage usage() const { return usage_; }
  Bytes gpu_free() const { return cfg_.gpu_capacity - usage_.gpu_resident_bytes; }
  Bytes cpu_free() const { return cfg_.cpu_capacity - usage_.cpu_resident_bytes; }
  Bytes mapped_bytes() const;

  ResidencyCensus census() const;
  /// Full scan of residency, counter, ownership and capacity invariants.
  /// Returns an empty string when everything holds.
  std::string check_invariants() const;

 private:
  struct Live {
    VirtualAllocation alloc;
    std::vector<PageTableEntry> pages;
  };

  Live& live(AllocId id);
  const Live& live(AllocId id) const;
  void account(Residency r, Bytes bytes, bool add);
  static OwnerTable owner_for(AllocKind kind, Residency r);

  MachineConfig cfg_;
  std::map<std::uint32_t, Live> allocs_;
  std::map<Addr, std::uint32_t> by_base_;
  TierUsage usage_;
  Addr next_base_ = kVirtualBase;
  std::uint32_t next_id_ = 1;
};

}  // namespace umsim
