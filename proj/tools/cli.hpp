#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mbvge/em.hpp"

namespace mbvge::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

/// Input that fails validation; mapped to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs one command line (without the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// Comma-separated file with a header line. Blank lines are skipped.
CsvTable read_csv(const std::string& path);

/// Reads (x1, x2) pairs from the columns named x1 and x2, or from the first
/// two columns when the file has no header. Throws UsageError as
/// "line N: expected 2 numeric fields".
std::vector<Point2> read_pairs(const std::string& path);

/// FNV-1a 64-bit hash of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

}  // namespace mbvge::cli
