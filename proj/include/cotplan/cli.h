#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cotplan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDataError = 2;

/// Entry point of the command-line tool. `args[0]` is the program name.
/// Subcommands: run, eval, lift, render.
int Dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace cotplan
