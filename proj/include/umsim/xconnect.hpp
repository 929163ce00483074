#pragma once

#include <array>
#include <string_view>
#include <utility>

#include "umsim/memmodel.hpp"
#include "umsim/types.hpp"

namespace umsim {

/// Byte counters for one run. All fields only ever grow.
///
/// cost_of_migration adds migrated bytes to both migrated_* and c2c_*, so
/// c2c_h2d/c2c_d2h carry access and migration traffic while
/// c2c_remote_read isolates what accesses read over the link.
struct TrafficCounters {
  Bytes gpu_local_read = 0;
  Bytes gpu_local_write = 0;
  Bytes cpu_local_read = 0;
  Bytes cpu_local_write = 0;
  Bytes c2c_h2d = 0;
  Bytes c2c_d2h = 0;
  Bytes c2c_writeback = 0;
  Bytes migrated_h2d = 0;
  Bytes migrated_d2h = 0;
  Bytes requested_bytes = 0;
  Bytes c2c_remote_read = 0;

  /// Interconnect bytes over requested bytes; 0 when nothing was requested.
  double amplification() const;
  Bytes c2c_total() const { return c2c_h2d + c2c_d2h + c2c_writeback; }

  /// (name, value) for every counter, in serialization order.
  std::array<std::pair<std::string_view, Bytes>, 11> fields() const;

  friend bool operator==(const TrafficCounters&, const TrafficCounters&) = default;
};

enum class ServicedFrom : std::uint8_t { LocalCpu, LocalGpu, RemoteOverC2C };

struct AccessResolution {
  ServicedFrom serviced_from = ServicedFrom::LocalGpu;
  Bytes bytes_on_wire = 0;
  Seconds elapsed = 0;
  Bytes wrote_back = 0;
};

/// Cost of one access to a page resident in `residency` (Cpu or Gpu).
///
/// Local accesses stream at the tier's bandwidth. Remote accesses move whole
/// requester cachelines over the link:
///   read   -> lines on the directional read path
///   write  -> lines counted as writeback
///   atomic -> one line read plus one line written back, one latency
AccessResolution resolve_access(const AccessEvent& ev, Residency residency, const MachineConfig& cfg);

/// Adds one resolved access to the counters.
void record_access(TrafficCounters& tc, const AccessEvent& ev, const AccessResolution& res);

/// migration_fixed_cost + bytes / directional link bandwidth. Throws
/// UsageError for a zero-byte request.
Seconds cost_of_migration(Bytes bytes, Direction dir, const MachineConfig& cfg);

void record_migration(TrafficCounters& tc, Bytes bytes, Direction dir);

}  // namespace umsim
