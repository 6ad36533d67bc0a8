#pragma once

#include <string>
#include <vector>

namespace retypelab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

/// Runs the retypelab command line (argv without the program name).
/// Returns the process exit code; never throws.
int run(const std::vector<std::string>& args);

}  // namespace retypelab::cli
