#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cdpforge::cli {

// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;

/// Runs the command line `args` (without the program name). Machine-readable
/// progress goes to `out`, diagnostics to `err`. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cdpforge::cli
