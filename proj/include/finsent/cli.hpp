#pragma once

#include <ostream>

namespace finsent::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

/// Runs the `finsent` command line. Subcommands: stats, freq, agreement,
/// train, predict, eval, correlate. Every run writes its reports plus a
/// manifest.json (options, seed, SHA-256 of each input) into the output
/// directory.
///
/// Option precedence: command-line flag, then config file (--config), then
/// the FINSENT_OUT_DIR environment variable (output directory only), then the
/// built-in default.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace finsent::cli
