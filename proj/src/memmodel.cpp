#include "umsim/memmodel.hpp"

#include <sstream>

#include "umsim/error.hpp"

namespace umsim {

void MachineConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("machine: " + what); };
  if (system_page_size != 4 * KiB && system_page_size != 64 * KiB)
    fail("system_page_size must be 4096 or 65536");
  if (gpu_page_size != 2 * MiB) fail("gpu_page_size must be 2097152");
  if (gpu_page_size % system_page_size != 0) fail("gpu_page_size must be a multiple of system_page_size");
  if (!is_pow2(cpu_cacheline) || !is_pow2(gpu_cacheline)) fail("cacheline sizes must be powers of two");
  if (cpu_capacity == 0 || gpu_capacity == 0) fail("capacities must be > 0");
  if (gpu_reserved_baseline >= gpu_capacity) fail("gpu_reserved_baseline must be below gpu_capacity");
  if (!(cpu_bw > 0) || !(gpu_bw > 0) || !(c2c_bw_h2d > 0) || !(c2c_bw_d2h > 0))
    fail("bandwidths must be > 0");
  for (Seconds c : {c2c_latency, fault_cost_cpu, fault_cost_gpu_first_touch, pte_teardown_cost,
                    migration_fixed_cost, notification_cost, pte_create_cost, gpu_fault_cost,
                    gpu_context_init_cost}) {
    if (!(c >= 0)) fail("costs and latencies must be >= 0");
  }
}

std::string ResidencyCensus::describe() const {
  std::ostringstream os;
  os << "unmapped=" << unmapped << " cpu=" << cpu << " gpu=" << gpu
     << " system_wide_entries=" << system_wide_entries
     << " gpu_exclusive_entries=" << gpu_exclusive_entries;
  return os.str();
}

MemorySystem::MemorySystem(MachineConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  usage_.gpu_resident_bytes = cfg_.gpu_reserved_baseline;
}

OwnerTable MemorySystem::owner_for(AllocKind kind, Residency r) {
  if (kind == AllocKind::DeviceOnly) return OwnerTable::GpuExclusive;
  if (kind == AllocKind::Managed && r == Residency::Gpu) return OwnerTable::GpuExclusive;
  return OwnerTable::SystemWide;
}

void MemorySystem::account(Residency r, Bytes bytes, bool add) {
  Bytes& slot = r == Residency::Cpu ? usage_.cpu_resident_bytes : usage_.gpu_resident_bytes;
  if (r == Residency::Unmapped) return;
  slot = add ? slot + bytes : slot - bytes;
}

MemorySystem::Allocated MemorySystem::allocate(AllocKind kind, Bytes length, std::optional<Addr> fixed_base) {
  if (length == 0) throw UsageError("allocate: length must be > 0");
  const Bytes page = kind == AllocKind::DeviceOnly ? cfg_.gpu_page_size : cfg_.system_page_size;
  const Bytes rounded = round_up(length, page);
  const std::uint64_t pages = rounded / page;

  if (kind == AllocKind::DeviceOnly && rounded > gpu_free()) {
    throw AllocationFailure("allocate: DeviceOnly allocation of " + std::to_string(rounded) +
                            " bytes exceeds free GPU memory (" + std::to_string(gpu_free()) + ")");
  }
  if (kind == AllocKind::HostPinned && rounded > cpu_free()) {
    throw AllocationFailure("allocate: HostPinned allocation of " + std::to_string(rounded) +
                            " bytes exceeds free CPU memory (" + std::to_string(cpu_free()) + ")");
  }

  const Addr base = fixed_base ? *fixed_base : next_base_;
  if (base % cfg_.gpu_page_size != 0) throw UsageError("allocate: base must be 2 MiB aligned");
  if (auto it = by_base_.lower_bound(base); it != by_base_.end() && it->first < base + rounded)
    throw UsageError("allocate: virtual range overlaps a live allocation");
  if (locate(base)) throw UsageError("allocate: virtual range overlaps a live allocation");

  Live l;
  l.alloc = VirtualAllocation{AllocId{next_id_++}, base, rounded, kind, page};
  if (!fixed_base) next_base_ = round_up(l.alloc.end(), cfg_.gpu_page_size);

  l.pages.resize(pages);
  const std::uint64_t first_vpn = l.alloc.base / page;
  const bool eager = kind == AllocKind::DeviceOnly || kind == AllocKind::HostPinned;
  const Residency eager_res = kind == AllocKind::DeviceOnly ? Residency::Gpu : Residency::Cpu;
  for (std::uint64_t i = 0; i < pages; ++i) {
    PageTableEntry& e = l.pages[i];
    e.vpn = first_vpn + i;
    if (eager) {
      e.residency = eager_res;
      e.first_touch_agent = kind == AllocKind::DeviceOnly ? FirstToucher::Gpu : FirstToucher::Cpu;
    }
    e.owner_table = owner_for(kind, e.residency);
  }
  if (eager) account(eager_res, rounded, true);

  const Seconds per_page = eager ? cfg_.fault_cost_cpu : cfg_.pte_create_cost;
  Allocated out{l.alloc, static_cast<double>(pages) * per_page};
  by_base_.emplace(l.alloc.base, l.alloc.id.value);
  allocs_.emplace(l.alloc.id.value, std::move(l));
  return out;
}

Seconds MemorySystem::deallocate(AllocId id) {
  auto it = allocs_.find(id.value);
  if (it == allocs_.end()) throw UsageError("deallocate: allocation " + std::to_string(id.value) + " is not live");
  const Live& l = it->second;
  for (const auto& e : l.pages) account(e.residency, l.alloc.page_size_in_use, false);
  const Seconds elapsed = static_cast<double>(l.pages.size()) * cfg_.pte_teardown_cost;
  by_base_.erase(l.alloc.base);
  allocs_.erase(it);
  return elapsed;
}

MemorySystem::Live& MemorySystem::live(AllocId id) {
  auto it = allocs_.find(id.value);
  if (it == allocs_.end()) throw UsageError("allocation " + std::to_string(id.value) + " is not live");
  return it->second;
}

const MemorySystem::Live& MemorySystem::live(AllocId id) const {
  auto it = allocs_.find(id.value);
  if (it == allocs_.end()) throw UsageError("allocation " + std::to_string(id.value) + " is not live");
  return it->second;
}

const VirtualAllocation& MemorySystem::allocation(AllocId id) const { return live(id).alloc; }
bool MemorySystem::is_live(AllocId id) const { return allocs_.count(id.value) != 0; }

std::vector<AllocId> MemorySystem::live_allocations() const {
  std::vector<AllocId> out;
  out.reserve(by_base_.size());
  for (const auto& [base, id] : by_base_) out.push_back(AllocId{id});
  return out;
}

PageTableEntry& MemorySystem::pte(PageRef p) { return live(p.alloc).pages.at(p.index); }
const PageTableEntry& MemorySystem::pte(PageRef p) const { return live(p.alloc).pages.at(p.index); }
std::span<PageTableEntry> MemorySystem::ptes(AllocId id) { return live(id).pages; }
std::span<const PageTableEntry> MemorySystem::ptes(AllocId id) const { return live(id).pages; }

std::optional<PageRef> MemorySystem::locate(Addr addr) const {
  auto it = by_base_.upper_bound(addr);
  if (it == by_base_.begin()) return std::nullopt;
  --it;
  const Live& l = allocs_.at(it->second);
  if (!l.alloc.contains(addr)) return std::nullopt;
  return PageRef{l.alloc.id, (addr - l.alloc.base) / l.alloc.page_size_in_use};
}

Addr MemorySystem::page_addr(PageRef p) const {
  const auto& a = allocation(p.alloc);
  return a.base + p.index * a.page_size_in_use;
}

Translation MemorySystem::translate(Addr addr, Agent) const {
  Translation t;
  t.page = locate(addr);
  if (!t.page) return t;
  t.residency = pte(*t.page).residency;
  t.outcome = t.residency == Residency::Unmapped ? Translation::Outcome::FirstTouchFault
                                                 : Translation::Outcome::Hit;
  return t;
}

void MemorySystem::map_page(PageRef p, Tier tier, Agent toucher) {
  Live& l = live(p.alloc);
  PageTableEntry& e = l.pages.at(p.index);
  if (e.residency != Residency::Unmapped) throw UsageError("map_page: page is already mapped");
  const Bytes page = l.alloc.page_size_in_use;
  if ((tier == Tier::Gpu ? gpu_free() : cpu_free()) < page) {
    throw CapacityError(std::string("map_page: ") + (tier == Tier::Gpu ? "GPU" : "CPU") + " memory is full");
  }
  e.residency = residency_of(tier);
  e.first_touch_agent = toucher == Agent::Cpu ? FirstToucher::Cpu : FirstToucher::Gpu;
  e.owner_table = owner_for(l.alloc.kind, e.residency);
  account(e.residency, page, true);
}

void MemorySystem::move_page(PageRef p, Tier dest) {
  Live& l = live(p.alloc);
  PageTableEntry& e = l.pages.at(p.index);
  if (e.residency == Residency::Unmapped) throw UsageError("move_page: page is unmapped");
  if (l.alloc.kind == AllocKind::DeviceOnly || l.alloc.kind == AllocKind::HostPinned)
    throw UsageError("move_page: DeviceOnly/HostPinned pages never migrate");
  const Residency to = residency_of(dest);
  if (e.residency == to) return;
  const Bytes page = l.alloc.page_size_in_use;
  if ((dest == Tier::Gpu ? gpu_free() : cpu_free()) < page) {
    throw CapacityError(std::string("move_page: ") + (dest == Tier::Gpu ? "GPU" : "CPU") + " memory is full");
  }
  account(e.residency, page, false);
  e.residency = to;
  e.access_counter = 0;
  e.owner_table = owner_for(l.alloc.kind, to);
  account(to, page, true);
}

Bytes MemorySystem::mapped_bytes() const {
  Bytes total = 0;
  for (const auto& [id, l] : allocs_) {
    for (const auto& e : l.pages) {
      if (e.residency != Residency::Unmapped) total += l.alloc.page_size_in_use;
    }
  }
  return total;
}

ResidencyCensus MemorySystem::census() const {
  ResidencyCensus c;
  for (const auto& [id, l] : allocs_) {
    for (const auto& e : l.pages) {
      if (e.residency == Residency::Unmapped) ++c.unmapped;
      else if (e.residency == Residency::Cpu) ++c.cpu;
      else ++c.gpu;
      if (e.owner_table == OwnerTable::SystemWide) ++c.system_wide_entries;
      else ++c.gpu_exclusive_entries;
    }
  }
  return c;
}

std::string MemorySystem::check_invariants() const {
  std::ostringstream err;
  Bytes cpu = 0, gpu = cfg_.gpu_reserved_baseline;
  Addr prev_end = 0;
  for (const auto& [base, id] : by_base_) {
    const Live& l = allocs_.at(id);
    if (l.alloc.base < prev_end) err << "allocation " << id << " overlaps its predecessor; ";
    if (l.alloc.base % l.alloc.page_size_in_use != 0) err << "allocation " << id << " misaligned; ";
    prev_end = l.alloc.end();
    for (std::size_t i = 0; i < l.pages.size(); ++i) {
      const auto& e = l.pages[i];
      if (e.residency == Residency::Unmapped && (e.access_counter != 0 || e.dirty))
        err << "alloc " << id << " page " << i << ": unmapped page with counter/dirty state; ";
      if (e.owner_table != owner_for(l.alloc.kind, e.residency))
        err << "alloc " << id << " page " << i << ": wrong owner table; ";
      if (l.alloc.kind == AllocKind::DeviceOnly && e.residency != Residency::Gpu)
        err << "alloc " << id << " page " << i << ": DeviceOnly page not on GPU; ";
      if (l.alloc.kind == AllocKind::HostPinned && e.residency != Residency::Cpu)
        err << "alloc " << id << " page " << i << ": HostPinned page not on CPU; ";
      if (e.residency == Residency::Cpu) cpu += l.alloc.page_size_in_use;
      if (e.residency == Residency::Gpu) gpu += l.alloc.page_size_in_use;
    }
  }
  if (cpu != usage_.cpu_resident_bytes) err << "cpu usage drift; ";
  if (gpu != usage_.gpu_resident_bytes) err << "gpu usage drift; ";
  if (usage_.cpu_resident_bytes > cfg_.cpu_capacity) err << "cpu over capacity; ";
  if (usage_.gpu_resident_bytes > cfg_.gpu_capacity) err << "gpu over capacity; ";
  return err.str();
}

}  // namespace umsim
