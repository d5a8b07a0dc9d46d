#pragma once

#include <ostream>

namespace lrdet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPrecondition = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitUsage = 64;

// Parses argv, runs one subcommand and maps failures to exit codes. Results go
// to `out`; logs, the resolved config and error messages go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lrdet::cli
