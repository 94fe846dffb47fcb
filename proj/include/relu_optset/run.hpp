#pragma once

#include "relu_optset/config.hpp"

#include <string>
#include <vector>

namespace relu_optset {

enum ExitCode { kOk = 0, kOtherError = 1, kParseError = 2, kSolverError = 3, kCertificateError = 4 };

const std::vector<std::string>& commands();

// Runs one subcommand and writes its artifacts under cfg.out_dir. Exceptions propagate;
// exit_code_for maps them to the process status.
int run(const std::string& command, const ExperimentConfig& cfg);

int exit_code_for(const std::exception& e);

}  // namespace relu_optset
