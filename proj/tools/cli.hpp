#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sddnn::cli {

/// Runs one subcommand. `args` excludes the program name.
/// Returns 0 on success, 2 on usage/config/input errors, 1 on internal errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sddnn::cli
