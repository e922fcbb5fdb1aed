#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cnmt::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one subcommand. `args` excludes the program name. Metric JSON goes
/// to `out`, logs and diagnostics to `err`.
///
/// Exit codes: 0 success, 1 pipeline failure, 2 usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace cnmt::cli
