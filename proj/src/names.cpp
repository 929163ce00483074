#include "umsim/names.hpp"

#include <algorithm>
#include <string>

namespace umsim {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(Tier t) { return t == Tier::Cpu ? "cpu" : "gpu"; }

std::string_view to_string(PrefetchDirective::When w) {
  return w == PrefetchDirective::When::BeforeCompute ? "before_compute" : "each_iteration";
}

std::optional<Agent> agent_from(std::string_view s) {
  const auto t = lower(s);
  if (t == "cpu") return Agent::Cpu;
  if (t == "gpu") return Agent::Gpu;
  return std::nullopt;
}

std::optional<Tier> tier_from(std::string_view s) {
  const auto t = lower(s);
  if (t == "cpu") return Tier::Cpu;
  if (t == "gpu") return Tier::Gpu;
  return std::nullopt;
}

std::optional<AllocKind> alloc_kind_from(std::string_view s) {
  const auto t = lower(s);
  if (t == "system") return AllocKind::System;
  if (t == "managed") return AllocKind::Managed;
  if (t == "device" || t == "device_only") return AllocKind::DeviceOnly;
  if (t == "pinned" || t == "host_pinned") return AllocKind::HostPinned;
  return std::nullopt;
}

std::optional<Direction> direction_from(std::string_view s) {
  const auto t = lower(s);
  if (t == "h2d") return Direction::H2D;
  if (t == "d2h") return Direction::D2H;
  return std::nullopt;
}

std::optional<MigrationEvent::Cause> cause_from(std::string_view s) {
  using C = MigrationEvent::Cause;
  for (C c : {C::OnDemandFault, C::AccessCounterNotification, C::ExplicitPrefetch, C::Eviction}) {
    if (lower(s) == to_string(c)) return c;
  }
  return std::nullopt;
}

std::optional<AccessPattern::Kind> pattern_from(std::string_view s) {
  using K = AccessPattern::Kind;
  for (K k : {K::Regular, K::Irregular, K::Mixed}) {
    if (lower(s) == to_string(k)) return k;
  }
  return std::nullopt;
}

std::optional<PrefetchDirective::When> when_from(std::string_view s) {
  using W = PrefetchDirective::When;
  for (W w : {W::BeforeCompute, W::EachIteration}) {
    if (lower(s) == to_string(w)) return w;
  }
  return std::nullopt;
}

const std::vector<MachineField>& machine_fields() {
  using M = MachineConfig;
  static const std::vector<MachineField> fields = {
      {"cpu_capacity", &M::cpu_capacity},
      {"gpu_capacity", &M::gpu_capacity},
      {"gpu_reserved_baseline", &M::gpu_reserved_baseline},
      {"cpu_bw", &M::cpu_bw},
      {"gpu_bw", &M::gpu_bw},
      {"c2c_bw_h2d", &M::c2c_bw_h2d},
      {"c2c_bw_d2h", &M::c2c_bw_d2h},
      {"c2c_latency", &M::c2c_latency},
      {"cpu_cacheline", &M::cpu_cacheline},
      {"gpu_cacheline", &M::gpu_cacheline},
      {"system_page_size", &M::system_page_size},
      {"gpu_page_size", &M::gpu_page_size},
      {"fault_cost_cpu", &M::fault_cost_cpu},
      {"fault_cost_gpu_first_touch", &M::fault_cost_gpu_first_touch},
      {"pte_teardown_cost", &M::pte_teardown_cost},
      {"migration_fixed_cost", &M::migration_fixed_cost},
      {"notification_cost", &M::notification_cost},
      {"pte_create_cost", &M::pte_create_cost},
      {"gpu_fault_cost", &M::gpu_fault_cost},
      {"gpu_context_init_cost", &M::gpu_context_init_cost},
  };
  return fields;
}

}  // namespace umsim
