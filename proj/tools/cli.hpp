#pragma once

namespace emsca::cli {

inline constexpr int kExitOk = 0;
/// Operational failure: I/O, network, solver, malformed input.
inline constexpr int kExitError = 1;
/// Bad flags, invalid arguments, unknown names.
inline constexpr int kExitUsage = 2;
/// The command ran but a verification or acceptance check failed.
inline constexpr int kExitFailed = 3;

int run(int argc, char** argv);

}  // namespace emsca::cli
