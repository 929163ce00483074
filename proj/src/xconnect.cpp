#include "umsim/xconnect.hpp"

#include "umsim/error.hpp"

namespace umsim {

double TrafficCounters::amplification() const {
  if (requested_bytes == 0) return 0.0;
  return static_cast<double>(c2c_total()) / static_cast<double>(requested_bytes);
}

std::array<std::pair<std::string_view, Bytes>, 11> TrafficCounters::fields() const {
  return {{{"gpu_local_read", gpu_local_read},
           {"gpu_local_write", gpu_local_write},
           {"cpu_local_read", cpu_local_read},
           {"cpu_local_write", cpu_local_write},
           {"c2c_h2d", c2c_h2d},
           {"c2c_d2h", c2c_d2h},
           {"c2c_writeback", c2c_writeback},
           {"migrated_h2d", migrated_h2d},
           {"migrated_d2h", migrated_d2h},
           {"requested_bytes", requested_bytes},
           {"c2c_remote_read", c2c_remote_read}}};
}

AccessResolution resolve_access(const AccessEvent& ev, Residency residency, const MachineConfig& cfg) {
  if (residency == Residency::Unmapped) throw UsageError("resolve_access: page is unmapped");
  AccessResolution r;
  const bool local = residency == residency_of(tier_of(ev.agent));
  if (local) {
    r.serviced_from = ev.agent == Agent::Gpu ? ServicedFrom::LocalGpu : ServicedFrom::LocalCpu;
    const double bw = ev.agent == Agent::Gpu ? cfg.gpu_bw : cfg.cpu_bw;
    const double touched = ev.op == MemOp::Atomic ? 2.0 * ev.size : static_cast<double>(ev.size);
    r.elapsed = touched / bw;
    return r;
  }

  // Data requested by the GPU flows host-to-device; by the CPU device-to-host.
  const Bytes line = ev.agent == Agent::Gpu ? cfg.gpu_cacheline : cfg.cpu_cacheline;
  const double read_bw = ev.agent == Agent::Gpu ? cfg.c2c_bw_h2d : cfg.c2c_bw_d2h;
  const double write_bw = ev.agent == Agent::Gpu ? cfg.c2c_bw_d2h : cfg.c2c_bw_h2d;
  r.serviced_from = ServicedFrom::RemoteOverC2C;
  switch (ev.op) {
    case MemOp::Read: {
      r.bytes_on_wire = round_up(ev.size, line);
      r.elapsed = cfg.c2c_latency + static_cast<double>(r.bytes_on_wire) / read_bw;
      break;
    }
    case MemOp::Write: {
      r.bytes_on_wire = round_up(ev.size, line);
      r.wrote_back = r.bytes_on_wire;
      r.elapsed = cfg.c2c_latency + static_cast<double>(r.bytes_on_wire) / write_bw;
      break;
    }
    case MemOp::Atomic: {
      r.bytes_on_wire = 2 * line;
      r.wrote_back = line;
      r.elapsed = cfg.c2c_latency + static_cast<double>(line) / read_bw + static_cast<double>(line) / write_bw;
      break;
    }
  }
  return r;
}

void record_access(TrafficCounters& tc, const AccessEvent& ev, const AccessResolution& res) {
  tc.requested_bytes += ev.size;
  const bool reads = ev.op != MemOp::Write;
  const bool writes = ev.op != MemOp::Read;
  switch (res.serviced_from) {
    case ServicedFrom::LocalGpu:
      if (reads) tc.gpu_local_read += ev.size;
      if (writes) tc.gpu_local_write += ev.size;
      return;
    case ServicedFrom::LocalCpu:
      if (reads) tc.cpu_local_read += ev.size;
      if (writes) tc.cpu_local_write += ev.size;
      return;
    case ServicedFrom::RemoteOverC2C: {
      const Bytes read_bytes = res.bytes_on_wire - res.wrote_back;
      if (read_bytes > 0) {
        (ev.agent == Agent::Gpu ? tc.c2c_h2d : tc.c2c_d2h) += read_bytes;
        tc.c2c_remote_read += read_bytes;
      }
      tc.c2c_writeback += res.wrote_back;
      return;
    }
  }
}

Seconds cost_of_migration(Bytes bytes, Direction dir, const MachineConfig& cfg) {
  if (bytes == 0) throw UsageError("cost_of_migration: zero-byte migration");
  const double bw = dir == Direction::H2D ? cfg.c2c_bw_h2d : cfg.c2c_bw_d2h;
  return cfg.migration_fixed_cost + static_cast<double>(bytes) / bw;
}

void record_migration(TrafficCounters& tc, Bytes bytes, Direction dir) {
  if (dir == Direction::H2D) {
    tc.migrated_h2d += bytes;
    tc.c2c_h2d += bytes;
  } else {
    tc.migrated_d2h += bytes;
    tc.c2c_d2h += bytes;
  }
}

}  // namespace umsim
