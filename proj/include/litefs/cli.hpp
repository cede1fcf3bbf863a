#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace litefs {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_runtime = 2;

// Command-line front end. `args` excludes the program name. Subcommands:
// train, swap, bench, forge, paramcount, align, synth. Returns 0 on success,
// 1 on usage/configuration errors, 2 on runtime failures.
int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace litefs
