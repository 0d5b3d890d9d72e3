#pragma once

#include <string>
#include <vector>

namespace delaypmp::cli {

/// Exit codes of the command-line front end.
enum Status : int { Ok = 0, ThresholdsMissed = 1, BadInput = 2, NumericalFailure = 3 };

/// Runs one command; args excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace delaypmp::cli
