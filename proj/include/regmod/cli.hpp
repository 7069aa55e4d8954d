// Command-line entry point. Subcommands: register, evaluate, jacobian,
// synth. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
// failure.
#pragma once

#include <string>
#include <vector>

namespace regmod {

int run_cli(const std::vector<std::string>& args);

}  // namespace regmod
