#pragma once

#include <iosfwd>

namespace qabench {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitProvider = 3;
inline constexpr int kExitAborted = 4;

/// Entry point of the `qabench` tool. Reports go to `out`, progress and
/// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace qabench
