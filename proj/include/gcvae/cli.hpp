#pragma once

#include <iosfwd>

namespace gcvae {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical abort.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gcvae
