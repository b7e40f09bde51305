#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crown::cli {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kReportFormat = "crown-report-v1";

enum ExitCode : int { kOk = 0, kBadFlags = 1, kFileError = 2, kIncompatible = 3 };

/// Entry point shared by the `crown` binary and the tests. `args` excludes
/// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crown::cli
