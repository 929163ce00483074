#include "umsim/types.hpp"

namespace umsim {

std::string_view to_string(Agent a) { return a == Agent::Cpu ? "cpu" : "gpu"; }

std::string_view to_string(Residency r) {
  switch (r) {
    case Residency::Unmapped: return "unmapped";
    case Residency::Cpu: return "cpu";
    case Residency::Gpu: return "gpu";
  }
  return "?";
}

std::string_view to_string(OwnerTable t) {
  return t == OwnerTable::SystemWide ? "system_wide" : "gpu_exclusive";
}

std::string_view to_string(AllocKind k) {
  switch (k) {
    case AllocKind::System: return "system";
    case AllocKind::Managed: return "managed";
    case AllocKind::DeviceOnly: return "device";
    case AllocKind::HostPinned: return "pinned";
  }
  return "?";
}

std::string_view to_string(MemOp op) {
  switch (op) {
    case MemOp::Read: return "R";
    case MemOp::Write: return "W";
    case MemOp::Atomic: return "A";
  }
  return "?";
}

std::string_view to_string(Direction d) { return d == Direction::H2D ? "h2d" : "d2h"; }

std::string to_string(PhaseTag p) {
  switch (p.kind) {
    case PhaseTag::Kind::Alloc: return "alloc";
    case PhaseTag::Kind::Init: return "init";
    case PhaseTag::Kind::Compute: return "compute:" + std::to_string(p.iteration);
    case PhaseTag::Kind::Dealloc: return "dealloc";
  }
  return "?";
}

}  // namespace umsim
