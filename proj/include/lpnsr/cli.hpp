#pragma once

#include <string>
#include <vector>

namespace lpnsr {

// Dispatches one subcommand. Returns the process exit code:
// 0 success, 1 runtime failure, 2 usage error. Also usable in-process for
// determinism tests.
int run_cli(const std::vector<std::string>& args);

}  // namespace lpnsr
