#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cnhpp::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kNotConverged = 2 };

/// Runs the command line `args` (args[0] is the program name) and returns the
/// process exit code. Reports go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cnhpp::cli
