#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace embedforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;  // a check ran and did not pass
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;

// Entry point of the `embedforge` tool. `args` excludes the program name.
// Returns the process exit code; errors are reported on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Hash git would give `contents` as a blob object (hex SHA-1).
std::string git_blob_sha1(std::string_view contents);

}  // namespace embedforge
