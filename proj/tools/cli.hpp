#pragma once

#include <iosfwd>

namespace wmcm::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2, numerical = 3 };

// Subcommands fit, cv, simulate and report. Failures print one line
// "error: <kind>: <reason>" to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace wmcm::cli
