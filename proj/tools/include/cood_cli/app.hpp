#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cood::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitData = 4,
  kExitNumerical = 5,
};

/// Default output root when --out is omitted.
inline constexpr const char* kOutputRootEnv = "COOD_OUTPUT_ROOT";

/// Entry point for `cood <subcommand> ...`. `args` excludes the program
/// name. Errors are reported as a single line on `err`:
///   cood: error: code=<n> kind=<usage|config|data|numerical|internal> message="..."
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cood::cli
