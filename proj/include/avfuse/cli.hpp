#pragma once

#include <ostream>

namespace avfuse {

/// Exit codes shared by every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitInvalid = 2,  // usage, parse, validation and schema errors
  kExitRuntime = 3,  // pipeline failure during a run or replay
};

/// Entry point for the `avfuse` tool: validate, run, replay, compare.
/// Machine-readable output goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace avfuse
