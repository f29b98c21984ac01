#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace evoprune::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Entry point behind the evoprune binary. `args` excludes the program name.
// Returns 0 on success, 1 on usage/config errors, 2 on runtime or numeric
// failures (including a failed gradcheck).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evoprune::cli
