#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pa::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kRuntimeError = 3 };

/// args[0] is the program name. Data goes to `out`, progress and errors to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace pa::cli
