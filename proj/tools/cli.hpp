#pragma once

#include <ostream>

namespace mira::cli {

// Runs one `mira` command. Results go to `out`, diagnostics to `err`.
// Returns the process exit code: 0 on success, then 1 usage, 2 I/O,
// 3 backend, 4 invariant.
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mira::cli
