#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace grouprec::cli {

// Stable exit-code contract for scripting.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

/// Runs the CLI with `args` (args[0] is the program name). Normal output
/// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace grouprec::cli
