#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bitvoc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Runs one subcommand. args excludes the program name. Results go to --out
// when given, else to `out`; diagnostics go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bitvoc::cli
