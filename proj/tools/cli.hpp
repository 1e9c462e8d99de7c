#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sensel::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;    // ran, but a comparison threshold was missed
inline constexpr int kExitBadInput = 2;  // config / instance / flag errors
inline constexpr int kExitIo = 3;

/// Entry point shared by the executable and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sensel::cli
