#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace adamat::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalError = 3 };

/// Runs the command line `args` (without the program name). Results and the resolved
/// configuration go to `out`, progress and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adamat::cli
