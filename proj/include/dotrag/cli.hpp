#pragma once

#include <iosfwd>

namespace dotrag {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,     // bad flags or config
  kExitData = 3,      // index / input file validation
  kExitProvider = 4,  // LLM or embedder failure
};

/// Entry point behind the `dotrag` binary; output streams are injectable so
/// tests can run commands in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dotrag
