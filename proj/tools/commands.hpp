#pragma once

#include <string>
#include <vector>

namespace sre::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 2;
inline constexpr int kFitError = 3;
inline constexpr int kReplicateFailure = 4;

/// Parses and runs one `sre` invocation. args[0] is the program name.
int run(const std::vector<std::string>& args);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace sre::cli
