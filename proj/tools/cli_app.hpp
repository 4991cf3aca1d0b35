#pragma once

#include <string>
#include <vector>

namespace uwcsr::cli {

// Runs one command line and returns the process exit code:
// 0 ok, 2 config parse, 3 config semantic, 4 I/O, 5 missing artifact.
int run(const std::vector<std::string>& args);

}  // namespace uwcsr::cli
