#include "insider/error.hpp"

namespace insider {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::format: return "format";
    case ErrorCode::parse: return "parse";
    case ErrorCode::schema: return "schema";
    case ErrorCode::validation: return "validation";
    case ErrorCode::config: return "config";
    case ErrorCode::duplicate_key: return "duplicate_key";
    case ErrorCode::unmapped_identifier: return "unmapped_identifier";
    case ErrorCode::data_gap: return "data_gap";
    case ErrorCode::insufficient_history: return "insufficient_history";
    case ErrorCode::singular_design: return "singular_design";
    case ErrorCode::range: return "range";
    case ErrorCode::shape: return "shape";
    case ErrorCode::degenerate_labels: return "degenerate_labels";
    case ErrorCode::metric: return "metric";
    case ErrorCode::threshold: return "threshold";
    case ErrorCode::tuning: return "tuning";
    case ErrorCode::test: return "test";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

ParseError::ParseError(std::size_t offset, const std::string& message)
    : Error(ErrorCode::parse, message + " at byte " + std::to_string(offset)), offset_(offset) {}

SchemaError::SchemaError(std::string element)
    : Error(ErrorCode::schema, "missing mandatory element <" + element + ">"), element_(std::move(element)) {}

namespace {
std::string gap_message(const std::string& ticker, const std::vector<Date>& missing, const std::string& what) {
  std::string msg = what + " for " + ticker;
  if (!missing.empty()) {
    msg += " on";
    for (std::size_t i = 0; i < missing.size() && i < 8; ++i) msg += " " + missing[i].iso();
    if (missing.size() > 8) msg += " (+" + std::to_string(missing.size() - 8) + " more)";
  }
  return msg;
}
}  // namespace

DataGapError::DataGapError(std::string ticker, std::vector<Date> missing, const std::string& what)
    : Error(ErrorCode::data_gap, gap_message(ticker, missing, what)),
      ticker_(std::move(ticker)),
      missing_(std::move(missing)) {}

}  // namespace insider
