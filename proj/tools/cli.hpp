#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace msamp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitBreach = 2;

// Runs one command line (args excludes the program name). Exit 0 on success,
// 2 on a tolerance breach, 1 on any error including bad usage.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace msamp::cli
