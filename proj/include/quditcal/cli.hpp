#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace quditcal {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitUnconverged = 4,
};

class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `quditcal <grape|sample-noise|train|eval|sweep> --config <path> [flags]`.
/// Returns the process exit code; diagnostics go to stderr.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace quditcal
