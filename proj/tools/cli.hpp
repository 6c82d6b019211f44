#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace incentive::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitValidation = 3;

// Entry point shared by the executable and the tests. args[0] is the
// program name. The one-line summary goes to `out`, errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace incentive::cli
