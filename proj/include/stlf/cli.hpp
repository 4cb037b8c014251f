#pragma once

#include <string>
#include <vector>

namespace stlf {

// Entry point behind the `stlf` binary; exposed so tests can drive the CLI
// in-process. Exit codes: 0 success, 1 validation/usage error, 2 runtime error.
int cli_main(const std::vector<std::string>& args);

}  // namespace stlf
