#pragma once

#include <iosfwd>

namespace spectral_tower {

inline constexpr const char* kToolVersion = "0.1.0";

/// Entry point of the spectral-tower executable. Exit codes: 0 success,
/// 2 input or validation error, 3 numerical or search failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spectral_tower
