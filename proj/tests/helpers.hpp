#pragma once

#include <vector>

#include "umsim/engine.hpp"

namespace umsim::testing {

// Small machine for policy tests: 64 KiB pages, no driver baseline.
inline MachineConfig small_machine(Bytes gpu = 8 * MiB) {
  MachineConfig m;
  m.gpu_capacity = gpu;
  m.gpu_reserved_baseline = 0;
  m.cpu_capacity = 1 * GiB;
  return m;
}

inline AccessEvent gpu_read(Addr a, Bytes size = 128, std::uint32_t iter = 0) {
  return {Agent::Gpu, MemOp::Read, a, size, PhaseTag::compute(iter)};
}

inline AccessEvent cpu_write(Addr a, Bytes size = 64) { return {Agent::Cpu, MemOp::Write, a, size, PhaseTag::init()}; }

inline constexpr Addr kBase = MemorySystem::kVirtualBase;

}  // namespace umsim::testing
