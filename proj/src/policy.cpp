#include "umsim/policy.hpp"

#include <algorithm>

#include "umsim/error.hpp"

namespace umsim {

std::string_view to_string(MigrationEvent::Cause c) {
  switch (c) {
    case MigrationEvent::Cause::OnDemandFault: return "on_demand_fault";
    case MigrationEvent::Cause::AccessCounterNotification: return "access_counter_notification";
    case MigrationEvent::Cause::ExplicitPrefetch: return "explicit_prefetch";
    case MigrationEvent::Cause::Eviction: return "eviction";
  }
  return "?";
}

void PolicyConfig::validate(const MachineConfig& cfg) const {
  if (migration_threshold < 1) throw ConfigError("policy: migration_threshold must be >= 1");
  if (managed_migration_granularity != cfg.gpu_page_size)
    throw ConfigError("policy: managed_migration_granularity must equal gpu_page_size");
  if (counter_tracking_granularity != 0 && counter_tracking_granularity != cfg.system_page_size)
    throw ConfigError("policy: counter_tracking_granularity must equal system_page_size");
  if (first_touch_prefetch_chunk == 0 || first_touch_prefetch_chunk % cfg.system_page_size != 0)
    throw ConfigError("policy: first_touch_prefetch_chunk must be a positive multiple of system_page_size");
  if (allocator && *allocator != AllocKind::System && *allocator != AllocKind::Managed)
    throw ConfigError("policy: allocator override must be system or managed");
}

Policy::Policy(MemorySystem& mem, PolicyConfig pol, TrafficCounters& traffic, std::vector<MigrationEvent>& log)
    : mem_(mem), pol_(std::move(pol)), traffic_(traffic), log_(log) {
  pol_.validate(mem_.config());
}

Policy::PageRange Policy::chunk_of(PageRef p, Bytes granularity) const {
  const auto& a = mem_.allocation(p.alloc);
  const std::uint64_t per = std::max<std::uint64_t>(1, granularity / a.page_size_in_use);
  const std::uint64_t lo = p.index / per * per;
  return PageRange{p.alloc, lo, std::min(lo + per, a.page_count())};
}

void Policy::emit(MigrationEvent::Cause cause, const VirtualAllocation& a, std::uint64_t lo, std::uint64_t hi,
                  Direction dir, Bytes bytes) {
  MigrationEvent ev;
  ev.cause = cause;
  ev.first_vpn = a.base / a.page_size_in_use + lo;
  ev.pages = hi - lo;
  ev.direction = dir;
  ev.bytes = bytes;
  ev.tick = tick_;
  ev.time = now_;
  log_.push_back(ev);
  record_migration(traffic_, bytes, dir);
}

Seconds Policy::handle_first_touch(PageRef p, Agent toucher) {
  const auto& a = mem_.allocation(p.alloc);
  auto& e = mem_.pte(p);
  if (e.residency != Residency::Unmapped) throw UsageError("handle_first_touch: page already mapped");
  const auto& cfg = mem_.config();

  switch (a.kind) {
    case AllocKind::DeviceOnly:
    case AllocKind::HostPinned:
      throw UsageError("handle_first_touch: eager allocations have no unmapped pages");
    case AllocKind::Managed:
      if (toucher == Agent::Gpu) return managed_chunk_fault(p);
      mem_.map_page(p, Tier::Cpu, toucher);
      e.last_touch = tick_;
      ++stats_.cpu_faults;
      return cfg.fault_cost_cpu;
    case AllocKind::System:
      break;
  }

  if (toucher == Agent::Cpu) {
    mem_.map_page(p, Tier::Cpu, toucher);
    e.last_touch = tick_;
    ++stats_.cpu_faults;
    return cfg.fault_cost_cpu;
  }
  // GPU first touch: SMMU fault handled on the CPU. A full GPU falls back to
  // CPU placement instead of evicting.
  const Tier where = mem_.gpu_free() >= a.page_size_in_use ? Tier::Gpu : Tier::Cpu;
  mem_.map_page(p, where, toucher);
  e.last_touch = tick_;
  ++stats_.gpu_first_touch_faults;
  Seconds elapsed = cfg.fault_cost_gpu_first_touch;
  if (pol_.prefetch_after_first_touch) elapsed += first_touch_prefetch(p);
  return elapsed;
}

Seconds Policy::first_touch_prefetch(PageRef p) {
  const auto& a = mem_.allocation(p.alloc);
  const Bytes page = a.page_size_in_use;
  const PageRange r = chunk_of(p, pol_.first_touch_prefetch_chunk);
  Bytes moved = 0;
  for (std::uint64_t i = r.lo; i < r.hi; ++i) {
    if (mem_.gpu_free() < page) break;
    const PageRef q{p.alloc, i};
    auto& e = mem_.pte(q);
    if (e.residency == Residency::Unmapped) {
      mem_.map_page(q, Tier::Gpu, Agent::Gpu);
    } else if (e.residency == Residency::Cpu) {
      mem_.move_page(q, Tier::Gpu);
      moved += page;
    } else {
      continue;
    }
    e.last_touch = tick_;
  }
  if (moved == 0) return 0;
  emit(MigrationEvent::Cause::ExplicitPrefetch, a, r.lo, r.hi, Direction::H2D, moved);
  return cost_of_migration(moved, Direction::H2D, mem_.config());
}

Seconds Policy::on_gpu_access_managed(PageRef p) {
  const auto& e = mem_.pte(p);
  if (mem_.allocation(p.alloc).kind != AllocKind::Managed || e.residency != Residency::Cpu)
    throw UsageError("on_gpu_access_managed: expects a CPU-resident managed page");
  return e.evicted ? managed_evicted_fault(p) : managed_chunk_fault(p);
}

Seconds Policy::managed_chunk_fault(PageRef p) {
  const auto& a = mem_.allocation(p.alloc);
  const auto& cfg = mem_.config();
  const Bytes page = a.page_size_in_use;
  const PageRange chunk = chunk_of(p, pol_.managed_migration_granularity);

  Bytes needed = 0;
  for (std::uint64_t i = chunk.lo; i < chunk.hi; ++i) {
    if (mem_.pte({p.alloc, i}).residency != Residency::Gpu) needed += page;
  }
  ++stats_.managed_gpu_faults;
  Seconds elapsed = cfg.gpu_fault_cost;
  if (mem_.gpu_free() < needed) elapsed += evict_for(needed, chunk);

  Bytes moved = 0;
  for (std::uint64_t i = chunk.lo; i < chunk.hi; ++i) {
    const PageRef q{p.alloc, i};
    auto& e = mem_.pte(q);
    if (e.residency == Residency::Cpu) {
      mem_.move_page(q, Tier::Gpu);
      moved += page;
    } else if (e.residency == Residency::Unmapped) {
      mem_.map_page(q, Tier::Gpu, Agent::Gpu);
    } else {
      continue;
    }
    e.evicted = false;
    e.last_touch = tick_;
  }
  if (moved > 0) {
    emit(MigrationEvent::Cause::OnDemandFault, a, chunk.lo, chunk.hi, Direction::H2D, moved);
    elapsed += cost_of_migration(moved, Direction::H2D, cfg);
  }
  return elapsed;
}

Seconds Policy::managed_evicted_fault(PageRef p) {
  const auto& a = mem_.allocation(p.alloc);
  const Bytes page = a.page_size_in_use;
  if (mem_.gpu_free() < page) {
    ++stats_.pressure_remote_accesses;
    return 0;
  }
  const auto& cfg = mem_.config();
  mem_.move_page(p, Tier::Gpu);
  auto& e = mem_.pte(p);
  e.evicted = false;
  e.last_touch = tick_;
  ++stats_.managed_gpu_faults;
  emit(MigrationEvent::Cause::OnDemandFault, a, p.index, p.index + 1, Direction::H2D, page);
  return cfg.gpu_fault_cost + cost_of_migration(page, Direction::H2D, cfg);
}

Seconds Policy::on_gpu_access_system(PageRef p) {
  if (!pol_.counters_enabled) return 0;
  auto& e = mem_.pte(p);
  if (e.residency != Residency::Cpu) return 0;
  if (++e.access_counter <= pol_.migration_threshold) return 0;

  const auto& a = mem_.allocation(p.alloc);
  const auto& cfg = mem_.config();
  const Bytes page = a.page_size_in_use;
  ++stats_.notifications;
  Seconds elapsed = cfg.notification_cost;

  const PageRange region = chunk_of(p, pol_.managed_migration_granularity);
  Bytes moved = 0;
  for (std::uint64_t i = region.lo; i < region.hi; ++i) {
    const PageRef q{p.alloc, i};
    auto& qe = mem_.pte(q);
    if (qe.residency == Residency::Cpu && mem_.gpu_free() >= page) {
      mem_.move_page(q, Tier::Gpu);
      qe.last_touch = tick_;
      moved += page;
    }
    qe.access_counter = 0;
  }
  if (moved > 0) {
    emit(MigrationEvent::Cause::AccessCounterNotification, a, region.lo, region.hi, Direction::H2D, moved);
    elapsed += cost_of_migration(moved, Direction::H2D, cfg);
  }
  return elapsed;
}

Seconds Policy::evict_for(Bytes bytes_needed, std::optional<PageRange> protect) {
  const auto& cfg = mem_.config();
  Seconds elapsed = 0;
  while (mem_.gpu_free() < bytes_needed) {
    struct Candidate {
      Tick recency;
      Addr addr;
      PageRange range;
    };
    std::optional<Candidate> best;
    auto consider = [&](Tick recency, Addr addr, PageRange range) {
      if (!best || recency < best->recency || (recency == best->recency && addr < best->addr))
        best = Candidate{recency, addr, range};
    };

    for (AllocId id : mem_.live_allocations()) {
      const auto& a = mem_.allocation(id);
      if (a.kind != AllocKind::Managed && a.kind != AllocKind::System) continue;
      const auto ptes = mem_.ptes(id);
      const std::uint64_t per = a.kind == AllocKind::Managed
                                    ? pol_.managed_migration_granularity / a.page_size_in_use
                                    : 1;
      for (std::uint64_t lo = 0; lo < ptes.size(); lo += per) {
        const std::uint64_t hi = std::min<std::uint64_t>(lo + per, ptes.size());
        bool any = false;
        Tick recency = 0;
        for (std::uint64_t i = lo; i < hi; ++i) {
          if (ptes[i].residency != Residency::Gpu) continue;
          if (protect && protect->contains({id, i})) continue;
          any = true;
          recency = std::max(recency, ptes[i].last_touch);
        }
        if (any) consider(recency, a.base + lo * a.page_size_in_use, PageRange{id, lo, hi});
      }
    }
    if (!best) {
      throw OutOfMemory("evict_for: need " + std::to_string(bytes_needed) + " free GPU bytes, have " +
                        std::to_string(mem_.gpu_free()) + " and nothing is evictable");
    }

    const auto& a = mem_.allocation(best->range.alloc);
    const Bytes page = a.page_size_in_use;
    Bytes moved = 0;
    for (std::uint64_t i = best->range.lo; i < best->range.hi; ++i) {
      const PageRef q{best->range.alloc, i};
      auto& e = mem_.pte(q);
      if (e.residency != Residency::Gpu || (protect && protect->contains(q))) continue;
      if (mem_.cpu_free() < page) throw OutOfMemory("evict_for: CPU memory is full");
      mem_.move_page(q, Tier::Cpu);
      e.evicted = a.kind == AllocKind::Managed;
      moved += page;
    }
    ++stats_.evictions;
    emit(MigrationEvent::Cause::Eviction, a, best->range.lo, best->range.hi, Direction::D2H, moved);
    elapsed += cost_of_migration(moved, Direction::D2H, cfg);
  }
  return elapsed;
}

Seconds Policy::prefetch(AllocId id, Bytes offset, Bytes length, Tier dest) {
  const auto& a = mem_.allocation(id);
  if (a.kind != AllocKind::System && a.kind != AllocKind::Managed)
    throw UsageError("prefetch: only System and Managed allocations can be prefetched");
  if (length == 0) return 0;
  if (offset >= a.length || length > a.length - offset) throw UsageError("prefetch: range outside allocation");

  const auto& cfg = mem_.config();
  const Bytes page = a.page_size_in_use;
  const std::uint64_t first = offset / page;
  const std::uint64_t last = (offset + length - 1) / page + 1;
  const std::uint64_t per = pol_.managed_migration_granularity / page;
  auto ptes = mem_.ptes(id);

  Seconds elapsed = 0;
  if (dest == Tier::Gpu) {
    const Tick stamp = advance();
    for (std::uint64_t i = first; i < last; ++i) {
      if (ptes[i].residency == Residency::Gpu) ptes[i].last_touch = stamp;
    }
  }

  for (std::uint64_t lo = first; lo < last;) {
    const std::uint64_t hi = std::min(last, (lo / per + 1) * per);
    advance();
    Bytes need = 0;
    for (std::uint64_t i = lo; i < hi; ++i) {
      if (ptes[i].residency != residency_of(dest)) need += page;
    }
    if (need > 0) {
      if (dest == Tier::Gpu && mem_.gpu_free() < need) elapsed += evict_for(need, PageRange{id, lo, hi});
      Bytes moved = 0;
      for (std::uint64_t i = lo; i < hi; ++i) {
        const PageRef q{id, i};
        auto& e = mem_.pte(q);
        if (e.residency == residency_of(dest)) continue;
        if (e.residency == Residency::Unmapped) {
          mem_.map_page(q, dest, dest == Tier::Gpu ? Agent::Gpu : Agent::Cpu);
        } else {
          mem_.move_page(q, dest);
          moved += page;
        }
        e.evicted = false;
        e.access_counter = 0;
        e.last_touch = tick_;
      }
      if (moved > 0) {
        const Direction dir = dest == Tier::Gpu ? Direction::H2D : Direction::D2H;
        emit(MigrationEvent::Cause::ExplicitPrefetch, a, lo, hi, dir, moved);
        elapsed += cost_of_migration(moved, dir, cfg);
      }
    }
    lo = hi;
  }
  return elapsed;
}

}  // namespace umsim
