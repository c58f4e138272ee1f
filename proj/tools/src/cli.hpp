#pragma once

#include <ostream>

namespace badfusion::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `badfusion` tool. Subcommands: poison, analyze, eval,
/// export-dense, defend.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace badfusion::cli
