#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bart::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;  // validation, domain, IO
inline constexpr int kExitUsage = 2;  // bad flags or arguments

/// Runs `bart-irl <args...>` (args excludes the program name) and returns the
/// exit code. Normal output goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bart::cli
