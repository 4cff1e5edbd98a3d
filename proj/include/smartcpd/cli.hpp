#pragma once

// Command-line front end. Exit codes: 0 ok, 2 usage or configuration error,
// 3 runtime failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace smartcpd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace smartcpd
