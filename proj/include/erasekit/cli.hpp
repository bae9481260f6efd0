#pragma once

namespace erasekit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitComputation = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `erasekit` binary.
int run(int argc, char** argv);

}  // namespace erasekit::cli
