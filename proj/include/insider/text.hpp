#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace insider::text {

/// Splits on `sep` without quote handling; every CSV in this project is quote-free.
std::vector<std::string_view> split(std::string_view line, char sep = ',');

std::string_view trim(std::string_view s);

/// Strict numeric parses; throw Error(ErrorCode::format) naming `what`.
double to_double(std::string_view s, std::string_view what);
std::int64_t to_int(std::string_view s, std::string_view what);

/// Shortest round-trip decimal representation.
std::string fmt(double v);
/// Fixed-precision rendering for human-facing tables.
std::string fixed(double v, int decimals);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Line-oriented CSV reader that validates the header row.
class CsvReader {
 public:
  CsvReader(const std::filesystem::path& path, std::vector<std::string> expected_header);

  /// Returns false at end of input. Blank lines are skipped.
  bool next(std::vector<std::string_view>& fields);
  /// 1-based line number of the row returned last (header is line 1).
  [[nodiscard]] std::size_t line() const { return line_; }
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string contents_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
  std::size_t width_ = 0;
};

}  // namespace insider::text
