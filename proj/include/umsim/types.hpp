#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace umsim {

using Bytes = std::uint64_t;
using Addr = std::uint64_t;
using Seconds = double;
using Tick = std::uint64_t;

inline constexpr Bytes KiB = 1024;
inline constexpr Bytes MiB = 1024 * KiB;
inline constexpr Bytes GiB = 1024 * MiB;

enum class Agent : std::uint8_t { Cpu, Gpu };
enum class Tier : std::uint8_t { Cpu, Gpu };
enum class Residency : std::uint8_t { Unmapped, Cpu, Gpu };
enum class OwnerTable : std::uint8_t { SystemWide, GpuExclusive };
enum class AllocKind : std::uint8_t { System, Managed, DeviceOnly, HostPinned };
enum class MemOp : std::uint8_t { Read, Write, Atomic };
enum class Direction : std::uint8_t { H2D, D2H };

constexpr Residency residency_of(Tier t) { return t == Tier::Cpu ? Residency::Cpu : Residency::Gpu; }
constexpr Tier tier_of(Agent a) { return a == Agent::Cpu ? Tier::Cpu : Tier::Gpu; }

/// Phase an access is attributed to. Compute phases carry a 0-based iteration.
struct PhaseTag {
  enum class Kind : std::uint8_t { Alloc, Init, Compute, Dealloc };
  Kind kind = Kind::Init;
  std::uint32_t iteration = 0;

  static constexpr PhaseTag alloc() { return {Kind::Alloc, 0}; }
  static constexpr PhaseTag init() { return {Kind::Init, 0}; }
  static constexpr PhaseTag compute(std::uint32_t i) { return {Kind::Compute, i}; }
  static constexpr PhaseTag dealloc() { return {Kind::Dealloc, 0}; }

  friend constexpr bool operator==(PhaseTag, PhaseTag) = default;
};

/// One agent-issued memory operation. `addr + size` never crosses a page.
struct AccessEvent {
  Agent agent = Agent::Gpu;
  MemOp op = MemOp::Read;
  Addr addr = 0;
  Bytes size = 1;
  PhaseTag phase;

  friend bool operator==(const AccessEvent&, const AccessEvent&) = default;
};

std::string_view to_string(Agent);
std::string_view to_string(Residency);
std::string_view to_string(OwnerTable);
std::string_view to_string(AllocKind);
std::string_view to_string(MemOp);
std::string_view to_string(Direction);
std::string to_string(PhaseTag);

constexpr Bytes round_up(Bytes v, Bytes unit) { return (v + unit - 1) / unit * unit; }
constexpr Addr align_down(Addr v, Bytes unit) { return v / unit * unit; }
constexpr bool is_pow2(Bytes v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace umsim
