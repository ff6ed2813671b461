#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace shapsel::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kBadArguments = 2,
  kIoFailure = 3,
  kStatsFailure = 4,
};

/// Runs `shapsel <subcommand> ...` with `args` excluding the program name.
/// Human-readable output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count from SHAPSEL_THREADS (default: hardware concurrency).
/// Throws ArgumentError for a value that is not a positive integer.
unsigned thread_count_from_env();

}  // namespace shapsel::cli
