#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace polyeit::cli {

enum ExitCode { kOk = 0, kUsage = 1, kInvalid = 2, kNumerical = 3 };

/// Entry point shared by the executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace polyeit::cli
