#pragma once

#include <ostream>

namespace drmn {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitValidation = 2, kExitNumeric = 3 };

/// Entry point of the `drmn` tool: gen-data, train, eval, curves, oracle,
/// show-config.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace drmn
