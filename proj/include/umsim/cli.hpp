#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace umsim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitOom = 3;

/// 2 for parse/config/usage errors, 3 for allocation failure and OOM.
int exit_code_for(const std::exception& e);

/// Entry point of the `umsim` tool. `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace umsim
