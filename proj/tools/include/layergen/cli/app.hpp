#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace layergen::cli {

/// Exit codes of the command line tool.
enum ExitCode : int { exit_pass = 0, exit_check_failed = 1, exit_error = 2 };

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace layergen::cli
