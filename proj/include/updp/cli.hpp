#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace updp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRecordFailures = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `updp` tool. `args` excludes the program name.
/// Returns the process exit status; never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace updp
