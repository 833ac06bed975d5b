#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tsk {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitIo = 1, kExitUsage = 2 };

/// Run the `tsk` command line. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsk
