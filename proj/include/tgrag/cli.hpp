#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace tgrag {

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,
    kExitState = 3,
    kExitData = 4,
    kExitProvider = 5,
};

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Runs `tgrag <args...>` in-process. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tgrag
