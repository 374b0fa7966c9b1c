#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mmrt::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

/// Runs one command line (without the program name). Exit codes:
/// 0 success, 1 semantic or runtime failure, 2 usage or load failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmrt::cli
