#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace panto::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDivergence = 3, kConditionFailure = 4 };

/// Replaces `--config file.json` by flags inserted right after the
/// subcommand, so flags given on the command line take precedence.
/// Keys map to `--key` (underscores become dashes); arrays are joined
/// with commas; true adds a bare flag, false and null are dropped.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

/// args excludes the program name. Reports go to `out` when the output
/// path is "-", diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace panto::cli
