#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace remul::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 for invalid input (bad flags, configs, data files) and 2 for
/// runtime failures such as numerical divergence.
int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace remul::cli
