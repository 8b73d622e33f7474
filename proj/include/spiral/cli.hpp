#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spiral::cli {

/// Exit codes of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitPropertyFailed = 1;
inline constexpr int kExitBadArguments = 2;
/// A run that could not finish: index budget, puncture scan cap, I/O.
inline constexpr int kExitRuntime = 3;

/// Runs one subcommand. args excludes the program name. Reports go to the
/// --out file when given, otherwise to out; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace spiral::cli
