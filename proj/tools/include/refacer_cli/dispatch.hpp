#pragma once

#include <cstdint>
#include <ostream>

namespace refacer::cli {

/// Runs one subcommand. Exit codes: 0 success, 1 runtime failure, 2 usage
/// error (no arguments, unknown flag, bad config). Failures print exactly one
/// line "error: <Kind>: <detail>" to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// REFACER_SEED when set to an unsigned integer, otherwise 0.
std::uint64_t default_seed();

}  // namespace refacer::cli
