#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spnet::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Runs one `spnet` invocation; args exclude the program name. Subcommands:
// synth, train, predict, eval, baseline, annotate.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spnet::tools
