#pragma once

#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "umsim/policy.hpp"
#include "umsim/types.hpp"
#include "umsim/workload.hpp"

// Inverse of the to_string() overloads. Case-insensitive; nullopt on an
// unknown name.
namespace umsim {

std::optional<Agent> agent_from(std::string_view);
std::optional<Tier> tier_from(std::string_view);
std::optional<AllocKind> alloc_kind_from(std::string_view);
std::optional<Direction> direction_from(std::string_view);
std::optional<MigrationEvent::Cause> cause_from(std::string_view);
std::optional<AccessPattern::Kind> pattern_from(std::string_view);
std::optional<PrefetchDirective::When> when_from(std::string_view);

std::string_view to_string(Tier);
std::string_view to_string(PrefetchDirective::When);

/// Every MachineConfig field by its config/report name, in declaration order.
struct MachineField {
  const char* name;
  std::variant<Bytes MachineConfig::*, double MachineConfig::*> member;
};
const std::vector<MachineField>& machine_fields();

}  // namespace umsim
