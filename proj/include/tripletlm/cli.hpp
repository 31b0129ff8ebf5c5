#pragma once

#include <iosfwd>

namespace tripletlm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand (train, embed, rank, eval, ablate, synth). Failures
/// print a single `error: <kind>: <message>` line on `err`.
int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);

}  // namespace tripletlm::cli
