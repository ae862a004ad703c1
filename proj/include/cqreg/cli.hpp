#pragma once

#include <string>
#include <vector>

namespace cqreg {

// Command-line front end. Exit codes: 0 success, 2 configuration or input
// error, 3 invalid experiment (too many excluded replications), 4 fit failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace cqreg
