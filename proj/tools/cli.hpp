#pragma once

#include <iosfwd>

namespace distill::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kDivergence = 3 };

// Runs one subcommand. Results go to `out`, diagnostics to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace distill::cli
