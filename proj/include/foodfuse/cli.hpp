#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace foodfuse::cli {

inline constexpr std::string_view kToolName = "foodfuse";
inline constexpr std::string_view kVersion = "0.3.0";

enum ExitCode : int { kOk = 0, kValidationError = 1, kIoError = 2 };

/// Runs one invocation; `args` excludes the program name. Data goes to
/// `out`, usage and error text to `err`, diagnostics to the logger.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// SHA-256 of a file as lowercase hex.
std::string sha256_file(const std::string& path);

}  // namespace foodfuse::cli
