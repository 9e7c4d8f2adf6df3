#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace confshift::cli {

enum ExitCode : int
{
  exit_ok = 0,
  exit_invalid = 1,
  exit_io = 2
};

//! Runs one invocation; args[0] is the program name. Normal output goes to
//! `out`, diagnostics and usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace confshift::cli
