#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scn {

/// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitRuntime = 3,
    kExitMissing = 4,
};

/// Entry point of the scn-lab command line. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scn
