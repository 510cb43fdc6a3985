#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ecanet::cli {

// Exit codes shared by every subcommand.
inline constexpr int kSuccess = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kUsageOrIo = 2;

/// Runs one invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ecanet::cli
