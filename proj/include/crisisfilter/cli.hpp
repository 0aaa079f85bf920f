#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crisisfilter {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs the command-line tool on `args` (without the program name),
/// writing results to `out` and diagnostics to `err`. Returns the exit
/// status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crisisfilter
