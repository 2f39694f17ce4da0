#pragma once

#include <ostream>
#include <string>
#include <string_view>

namespace fpirt::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kConvergence = 3 };

/// Runs one command line. Never throws; failures map to ExitCode values.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

}  // namespace fpirt::cli
