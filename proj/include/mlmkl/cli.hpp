#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mlmkl::cli {

/// Runs one command line (without the program name), e.g.
/// {"train", "--config", "c.json", "--train", "x.amat", "--out", "m.bin"}.
/// Returns the process exit code: 0 on success, 1 on a runtime error,
/// 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mlmkl::cli
