#pragma once

#include <ostream>

namespace mdiff::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime or numeric failure
inline constexpr int kExitUsage = 2;    // bad flags, config keys or values

// Entry point of the `mdiff` tool. argv[1] names the subcommand
// (synth, import, train, sample, eval, gradcheck, export).
//
// Settings resolve as: command-line flag, then the --config file, then MD_SEED
// (seed only), then the --preset table (train only), then the built-in default.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mdiff::app
