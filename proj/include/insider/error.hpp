#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "insider/date.hpp"

namespace insider {

enum class ErrorCode {
  io,
  format,
  parse,
  schema,
  validation,
  config,
  duplicate_key,
  unmapped_identifier,
  data_gap,
  insufficient_history,
  singular_design,
  range,
  shape,
  degenerate_labels,
  metric,
  threshold,
  tuning,
  test,
  internal,
};

const char* to_string(ErrorCode code);

/// Base exception for everything the library throws on bad input or data.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// Malformed XML; offset is the byte position reported by the tokenizer.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& message);
  [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A mandatory element is absent from an otherwise well-formed document.
class SchemaError : public Error {
 public:
  explicit SchemaError(std::string element);
  [[nodiscard]] const std::string& element() const noexcept { return element_; }

 private:
  std::string element_;
};

/// Market data required by a computation is missing.
class DataGapError : public Error {
 public:
  DataGapError(std::string ticker, std::vector<Date> missing, const std::string& what);
  [[nodiscard]] const std::string& ticker() const noexcept { return ticker_; }
  [[nodiscard]] const std::vector<Date>& missing() const noexcept { return missing_; }

 private:
  std::string ticker_;
  std::vector<Date> missing_;
};

}  // namespace insider
