#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gvr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

// Environment variable naming a default config file.
inline constexpr const char* kConfigEnvVar = "GVR_CONFIG";

// args[0] is the program name. Subcommands: score, score-loss, eval, match,
// demo.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gvr
