#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crn {

// Dispatches `crn <subcommand> ...`. Returns 0 on success, 2 on bad flags
// (usage on `err`) and 1 on any other failure (one "error:" line on `err`).
// `args` excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crn
