#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace segmict::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInputError = 2,
  kEvaluationMismatch = 3,
  kDivergence = 4,
};

/// Runs one command line; args[0] is the program name. Progress goes to
/// `out`, diagnostics to `err`. Never throws.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace segmict::cli
