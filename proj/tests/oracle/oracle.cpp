#include "oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace oracle {

using namespace umsim;

namespace {

enum Where { kNone = 0, kCpu = 1, kGpu = 2 };

struct Page {
  std::size_t buf;
  std::uint64_t idx;
  int where = kNone;
  std::uint32_t counter = 0;
  bool evicted = false;
  std::uint64_t last = 0;
};

struct Buf {
  Addr base;
  Bytes len;
  Bytes page;
  AllocKind kind;
  std::size_t first;  // index of page 0 in the flat array
  std::size_t n;
};

struct Oom {};

class Interp {
 public:
  explicit Interp(const Input& in) : in_(in), m_(in.machine), p_(in.policy) { gpu_used_ = m_.gpu_reserved_baseline; }

  Output go() {
    Addr next = 0x100000000ULL;
    for (auto b : in_.buffers) {
      if (p_.allocator && (b.kind == AllocKind::System || b.kind == AllocKind::Managed)) b.kind = *p_.allocator;
      const Bytes page = m_.system_page_size;
      const Bytes len = (b.length + page - 1) / page * page;
      Buf nb{next, len, page, b.kind, pages_.size(), len / page};
      for (std::uint64_t i = 0; i < nb.n; ++i) pages_.push_back(Page{bufs_.size(), i});
      bufs_.push_back(nb);
      next = (next + len + 2 * MiB - 1) / (2 * MiB) * (2 * MiB);
      t_ += nb.n * m_.pte_create_cost;
      if (b.kind == AllocKind::Managed) context();
    }
    std::size_t i = 0;
    try {
      for (; i < in_.events.size(); ++i) event(in_.events[i]);
    } catch (const Oom&) {
      out_.oom = true;
      out_.oom_event = i;
      return out_;
    }
    for (const auto& b : bufs_) t_ += b.n * m_.pte_teardown_cost;
    out_.total_time = t_;
    return out_;
  }

 private:
  Bytes gpu_free() const { return m_.gpu_capacity - gpu_used_; }

  void context() {
    if (ctx_) return;
    ctx_ = true;
    t_ += m_.gpu_context_init_cost;
  }

  void place(Page& pg, int to) {
    const Bytes sz = bufs_[pg.buf].page;
    if (pg.where == kCpu) cpu_used_ -= sz;
    if (pg.where == kGpu) gpu_used_ -= sz;
    if (to == kGpu) {
      if (gpu_free() < sz) throw Oom{};
      gpu_used_ += sz;
    }
    if (to == kCpu) {
      if (m_.cpu_capacity - cpu_used_ < sz) throw Oom{};
      cpu_used_ += sz;
    }
    if (pg.where != kNone) pg.counter = 0;  // migration resets the counter
    pg.where = to;
  }

  void migrated(MigrationEvent::Cause cause, const Buf& b, std::uint64_t lo, std::uint64_t hi, Direction d,
                Bytes bytes) {
    MigrationEvent ev;
    ev.cause = cause;
    ev.first_vpn = b.base / b.page + lo;
    ev.pages = hi - lo;
    ev.direction = d;
    ev.bytes = bytes;
    out_.migrations.push_back(ev);
    const double bw = d == Direction::H2D ? m_.c2c_bw_h2d : m_.c2c_bw_d2h;
    t_ += m_.migration_fixed_cost + static_cast<double>(bytes) / bw;
    if (d == Direction::H2D) {
      out_.traffic.migrated_h2d += bytes;
      out_.traffic.c2c_h2d += bytes;
    } else {
      out_.traffic.migrated_d2h += bytes;
      out_.traffic.c2c_d2h += bytes;
    }
  }

  std::uint64_t per_chunk(const Buf& b, Bytes gran) const { return std::max<Bytes>(1, gran / b.page); }

  // Evict least recently touched units until `need` bytes are free. Units:
  // 2 MiB chunks of managed buffers, single pages of system buffers.
  void make_room(Bytes need, std::size_t pbuf, std::uint64_t plo, std::uint64_t phi) {
    auto shielded = [&](const Page& pg) { return pg.buf == pbuf && pg.idx >= plo && pg.idx < phi; };
    while (gpu_free() < need) {
      bool found = false;
      std::uint64_t best_rec = 0;
      Addr best_addr = 0;
      std::size_t best_buf = 0;
      std::uint64_t best_lo = 0, best_hi = 0;
      std::vector<std::size_t> order(bufs_.size());
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return bufs_[a].base < bufs_[b].base; });
      for (std::size_t bi : order) {
        const Buf& b = bufs_[bi];
        const std::uint64_t unit = b.kind == AllocKind::Managed ? per_chunk(b, p_.managed_migration_granularity) : 1;
        for (std::uint64_t lo = 0; lo < b.n; lo += unit) {
          const std::uint64_t hi = std::min(b.n, lo + unit);
          bool any = false;
          std::uint64_t rec = 0;
          for (std::uint64_t k = lo; k < hi; ++k) {
            const Page& pg = pages_[b.first + k];
            if (pg.where != kGpu || shielded(pg)) continue;
            any = true;
            rec = std::max(rec, pg.last);
          }
          if (!any) continue;
          const Addr addr = b.base + lo * b.page;
          if (!found || rec < best_rec || (rec == best_rec && addr < best_addr)) {
            found = true;
            best_rec = rec;
            best_addr = addr;
            best_buf = bi;
            best_lo = lo;
            best_hi = hi;
          }
        }
      }
      if (!found) throw Oom{};
      const Buf& b = bufs_[best_buf];
      Bytes moved = 0;
      for (std::uint64_t k = best_lo; k < best_hi; ++k) {
        Page& pg = pages_[b.first + k];
        if (pg.where != kGpu || shielded(pg)) continue;
        place(pg, kCpu);
        pg.evicted = b.kind == AllocKind::Managed;
        moved += b.page;
      }
      ++out_.stats.evictions;
      migrated(MigrationEvent::Cause::Eviction, b, best_lo, best_hi, Direction::D2H, moved);
    }
  }

  void chunk_fault(const Buf& b, std::uint64_t idx) {
    const std::uint64_t per = per_chunk(b, p_.managed_migration_granularity);
    const std::uint64_t lo = idx / per * per, hi = std::min(b.n, lo + per);
    ++out_.stats.managed_gpu_faults;
    t_ += m_.gpu_fault_cost;
    Bytes need = 0;
    for (std::uint64_t k = lo; k < hi; ++k) need += pages_[b.first + k].where == kGpu ? 0 : b.page;
    if (gpu_free() < need) make_room(need, pages_[b.first].buf, lo, hi);
    Bytes moved = 0;
    for (std::uint64_t k = lo; k < hi; ++k) {
      Page& pg = pages_[b.first + k];
      if (pg.where == kGpu) continue;
      if (pg.where == kCpu) moved += b.page;
      place(pg, kGpu);
      pg.evicted = false;
      pg.last = tick_;
    }
    if (moved) migrated(MigrationEvent::Cause::OnDemandFault, b, lo, hi, Direction::H2D, moved);
  }

  void prefetch(std::size_t bi, int dest) {
    const Buf& b = bufs_[bi];
    if (dest == kGpu) {
      ++tick_;
      for (std::uint64_t k = 0; k < b.n; ++k) {
        if (pages_[b.first + k].where == kGpu) pages_[b.first + k].last = tick_;
      }
    }
    const std::uint64_t per = per_chunk(b, p_.managed_migration_granularity);
    for (std::uint64_t lo = 0; lo < b.n; lo += per) {
      const std::uint64_t hi = std::min(b.n, lo + per);
      ++tick_;
      Bytes need = 0;
      for (std::uint64_t k = lo; k < hi; ++k) need += pages_[b.first + k].where == dest ? 0 : b.page;
      if (need == 0) continue;
      if (dest == kGpu && gpu_free() < need) make_room(need, bi, lo, hi);
      Bytes moved = 0;
      for (std::uint64_t k = lo; k < hi; ++k) {
        Page& pg = pages_[b.first + k];
        if (pg.where == dest) continue;
        if (pg.where != kNone) moved += b.page;
        place(pg, dest);
        pg.evicted = false;
        pg.counter = 0;
        pg.last = tick_;
      }
      if (moved)
        migrated(MigrationEvent::Cause::ExplicitPrefetch, b, lo, hi, dest == kGpu ? Direction::H2D : Direction::D2H,
                 moved);
    }
  }

  void directives(const AccessEvent& ev) {
    if (ev.phase.kind != PhaseTag::Kind::Compute) return;
    const bool first = !started_;
    const bool fresh = first || ev.phase.iteration != iter_;
    started_ = true;
    iter_ = ev.phase.iteration;
    if (!fresh) return;
    for (const auto& d : p_.prefetch) {
      if (d.when == PrefetchDirective::When::BeforeCompute && !first) continue;
      if (d.dest == Tier::Gpu) context();
      prefetch(d.buffer, d.dest == Tier::Gpu ? kGpu : kCpu);
    }
  }

  void event(const AccessEvent& ev) {
    directives(ev);
    ++tick_;
    std::size_t bi = bufs_.size();
    for (std::size_t k = 0; k < bufs_.size(); ++k) {
      if (ev.addr >= bufs_[k].base && ev.addr < bufs_[k].base + bufs_[k].len) bi = k;
    }
    if (bi == bufs_.size()) throw std::runtime_error("oracle: address outside buffers");
    const Buf& b = bufs_[bi];
    const std::uint64_t idx = (ev.addr - b.base) / b.page;
    Page& pg = pages_[b.first + idx];
    const bool gpu = ev.agent == Agent::Gpu;
    if (gpu) context();

    if (pg.where == kNone) {
      if (b.kind == AllocKind::Managed && gpu) {
        chunk_fault(b, idx);
      } else if (!gpu) {
        place(pg, kCpu);
        ++out_.stats.cpu_faults;
        t_ += m_.fault_cost_cpu;
      } else {
        place(pg, gpu_free() >= b.page ? kGpu : kCpu);
        ++out_.stats.gpu_first_touch_faults;
        t_ += m_.fault_cost_gpu_first_touch;
        if (p_.prefetch_after_first_touch) first_touch_spread(b, idx);
      }
      pg.last = tick_;
    } else if (gpu && b.kind == AllocKind::Managed && pg.where == kCpu) {
      if (!pg.evicted) {
        chunk_fault(b, idx);
      } else if (gpu_free() < b.page) {
        ++out_.stats.pressure_remote_accesses;
      } else {
        place(pg, kGpu);
        pg.evicted = false;
        pg.last = tick_;
        ++out_.stats.managed_gpu_faults;
        t_ += m_.gpu_fault_cost;
        migrated(MigrationEvent::Cause::OnDemandFault, b, idx, idx + 1, Direction::H2D, b.page);
      }
    }

    serve(ev, pg.where);
    pg.last = tick_;

    if (gpu && b.kind == AllocKind::System && pg.where == kCpu && p_.counters_enabled) {
      if (++pg.counter > p_.migration_threshold) {
        ++out_.stats.notifications;
        t_ += m_.notification_cost;
        const std::uint64_t per = per_chunk(b, p_.managed_migration_granularity);
        const std::uint64_t lo = idx / per * per, hi = std::min(b.n, lo + per);
        Bytes moved = 0;
        for (std::uint64_t k = lo; k < hi; ++k) {
          Page& q = pages_[b.first + k];
          if (q.where == kCpu && gpu_free() >= b.page) {
            place(q, kGpu);
            q.last = tick_;
            moved += b.page;
          }
          q.counter = 0;
        }
        if (moved) migrated(MigrationEvent::Cause::AccessCounterNotification, b, lo, hi, Direction::H2D, moved);
      }
    }
  }

  void first_touch_spread(const Buf& b, std::uint64_t idx) {
    const std::uint64_t per = per_chunk(b, p_.first_touch_prefetch_chunk);
    const std::uint64_t lo = idx / per * per, hi = std::min(b.n, lo + per);
    Bytes moved = 0;
    for (std::uint64_t k = lo; k < hi && gpu_free() >= b.page; ++k) {
      Page& q = pages_[b.first + k];
      if (q.where == kGpu) continue;
      if (q.where == kCpu) moved += b.page;
      place(q, kGpu);
      q.last = tick_;
    }
    if (moved) migrated(MigrationEvent::Cause::ExplicitPrefetch, b, lo, hi, Direction::H2D, moved);
  }

  void serve(const AccessEvent& ev, int where) {
    auto& tc = out_.traffic;
    tc.requested_bytes += ev.size;
    const bool gpu = ev.agent == Agent::Gpu;
    const bool rd = ev.op == MemOp::Read || ev.op == MemOp::Atomic;
    const bool wr = ev.op == MemOp::Write || ev.op == MemOp::Atomic;
    if ((where == kGpu) == gpu) {
      (gpu ? tc.gpu_local_read : tc.cpu_local_read) += rd ? ev.size : 0;
      (gpu ? tc.gpu_local_write : tc.cpu_local_write) += wr ? ev.size : 0;
      t_ += (ev.op == MemOp::Atomic ? 2.0 : 1.0) * static_cast<double>(ev.size) / (gpu ? m_.gpu_bw : m_.cpu_bw);
      return;
    }
    const Bytes line = gpu ? m_.gpu_cacheline : m_.cpu_cacheline;
    const double to_me = gpu ? m_.c2c_bw_h2d : m_.c2c_bw_d2h;
    const double from_me = gpu ? m_.c2c_bw_d2h : m_.c2c_bw_h2d;
    Bytes& inbound = gpu ? tc.c2c_h2d : tc.c2c_d2h;
    const Bytes lines = (ev.size + line - 1) / line * line;
    t_ += m_.c2c_latency;
    if (ev.op == MemOp::Read) {
      inbound += lines;
      tc.c2c_remote_read += lines;
      t_ += static_cast<double>(lines) / to_me;
    } else if (ev.op == MemOp::Write) {
      tc.c2c_writeback += lines;
      t_ += static_cast<double>(lines) / from_me;
    } else {
      inbound += line;
      tc.c2c_remote_read += line;
      tc.c2c_writeback += line;
      t_ += static_cast<double>(line) / to_me + static_cast<double>(line) / from_me;
    }
  }

  const Input& in_;
  MachineConfig m_;
  PolicyConfig p_;
  std::vector<Buf> bufs_;
  std::vector<Page> pages_;
  Bytes gpu_used_ = 0;
  Bytes cpu_used_ = 0;
  std::uint64_t tick_ = 0;
  double t_ = 0;
  bool ctx_ = false;
  bool started_ = false;
  std::uint32_t iter_ = 0;
  Output out_;
};

}  // namespace

Output replay(const Input& in) { return Interp(in).go(); }

}  // namespace oracle
