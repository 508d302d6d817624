#pragma once

#include <iosfwd>

namespace earlystop::cli {

/// Entry point of the earlystop command line. Output goes to `out` unless
/// --out is given; diagnostics go to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace earlystop::cli
