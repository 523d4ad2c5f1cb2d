#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace q2q::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line (args[0] is the program name). Human-readable
// summaries go to `out`, diagnostics to `err`; data goes to files only.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace q2q::cli
