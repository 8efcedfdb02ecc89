#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bertgram::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point of the `bertgram` tool. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bertgram::cli
