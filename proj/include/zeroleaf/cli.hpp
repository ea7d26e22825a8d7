#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace zeroleaf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `zeroleaf` invocation. args excludes the program name.
/// Returns 0 on success, 1 on runtime failure, 2 on usage errors.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zeroleaf::cli
