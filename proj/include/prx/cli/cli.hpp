#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace prx::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line. `args` excludes the program name. Reports go to
// `out`; diagnostics and usage synopses go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prx::cli
