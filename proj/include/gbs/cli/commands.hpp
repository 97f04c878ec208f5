#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gbs::cli {

// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;     // bad flags
inline constexpr int kInput = 2;     // config, parse or validation failure
inline constexpr int kRun = 3;       // simulation failed mid-run
inline constexpr int kSingular = 4;  // direct solve on a singular system
inline constexpr int kIo = 5;

// Entry point behind the gbs tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version_json();

}  // namespace gbs::cli
