#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcpca::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

/// Runs one command line (args[0] is the program name). Never throws; every
/// failure maps to kExitInput or kExitNumerical with a message on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mcpca::cli
