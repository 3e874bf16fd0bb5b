#pragma once

#include <iosfwd>

namespace pmx {

/// Exit codes of the command line tool.
enum ExitCode { kExitOk = 0, kExitViolated = 1, kExitStuck = 2 };

/// Entry point of the `pmx` tool: run | symex | simplify | translate | check | difftest.
/// Artifacts go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pmx
