#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace routekg::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one subcommand.  `args` excludes the program name.  Structured
/// output goes to `out` unless an `--out` file is given; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace routekg::cli
