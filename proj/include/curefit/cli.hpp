#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace curefit {

/// Process exit codes of the `curefit` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitUsage = 2,
  kExitData = 3,
  kExitNonConvergence = 4,
  kExitStudyInstability = 5,
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace curefit
