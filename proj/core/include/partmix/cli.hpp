#pragma once

#include <string>
#include <vector>

// Command-line front end. Subcommands: fit, evaluate, are, asymptotic-error,
// simulate (presets table1, figure1, eq2 or --config JSON). Exit codes:
// 0 success, 2 usage error, 1 any computation or parsing error.

namespace partmix::cli {

int run(int argc, const char* const* argv);

/// Test-friendly entry point; args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace partmix::cli
