#pragma once

#include "ppap/errors.hpp"

namespace ppap::cli {

inline constexpr const char* kVersion = "1.0.0";

// 0 success, 2 usage or configuration error, 3 I/O or malformed data,
// 4 numerical failure.
int exit_code_for(ErrorKind kind);

// Parses argv and runs one subcommand. Never throws; failures are reported on
// stderr and folded into the returned exit code.
int dispatch(int argc, const char* const* argv);

}  // namespace ppap::cli
