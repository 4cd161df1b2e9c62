#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pb {

// Entry point of the `pbtool` command line (arguments exclude the program
// name). Exit status: 0 success, 2 invalid input or usage, 1 processing failure.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace pb
