#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cream {

/// Runs the command line (without the program name). Failures print a
/// single "error: kind=... message=..." line to err and return nonzero:
/// 2 for usage errors, 1 for everything else.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace cream
