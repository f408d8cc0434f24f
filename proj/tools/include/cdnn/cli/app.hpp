#pragma once

#include <iosfwd>

namespace cdnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Parses argv, runs the subcommand and writes its artifacts. Primary results
/// go to `out`, diagnostics and usage text to `err`.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdnn::cli
