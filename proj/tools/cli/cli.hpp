#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tiger::cli {

/// Exit codes returned by `run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses `args` (without the program name) and executes one subcommand.
/// Diagnostics go to `err` as a single line; normal output goes to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker limit from TIGER_THREADS (default 1). Throws InvalidArgument on a
/// malformed value.
unsigned thread_limit();

}  // namespace tiger::cli
