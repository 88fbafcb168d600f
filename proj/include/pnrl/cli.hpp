#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pnrl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

// `args` excludes the program name. Output goes to `out`, diagnostics to
// `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pnrl::cli
