#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nl2api {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,       // bad flags, unknown ids, missing corpus
  kExitBackend = 3,     // backend unreachable or credential missing
  kExitNoQuery = 4,     // the model produced no query
};

/// Entry point behind the `nl2api` binary. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nl2api
