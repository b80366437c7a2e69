#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace adaptq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Runs one invocation. `args` excludes the program name. Never throws.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace adaptq::cli
