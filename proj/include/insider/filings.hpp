#pragma once

#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "insider/date.hpp"
#include "insider/marketdata.hpp"

namespace insider::filings {

/// One non-derivative Form 4 transaction row.
struct InsiderTransaction {
  std::string accession_id;
  std::string issuer_id;
  std::string cusip;
  std::string ticker;
  std::string insider_id;
  std::string insider_title_raw;
  Date transaction_date;
  Date disclosure_date;
  char transaction_code = '?';
  double shares = 0.0;
  double price_per_share = 0.0;
  double transaction_value = 0.0;

  bool operator==(const InsiderTransaction&) const = default;
};

struct FilterConfig {
  int max_lag_days = 90;
  double min_value = 5000.0;
  double min_cap = 30e6;
  double max_cap = 500e6;
  double min_addv = 200000.0;
  int addv_window_days = 30;
  std::size_t min_addv_days = 10;
  /// Abort on missing market data instead of rejecting the record.
  bool strict = false;

  /// Throws Error(ErrorCode::config) when a threshold is non-positive or the cap band is empty.
  void validate() const;
};

struct CusipRange {
  std::string permanent_id;
  std::string ticker;
  Date effective_from;
  Date effective_to;  // inclusive
};

/// cusip -> dated (permanent id, ticker) assignments with non-overlapping ranges.
class CusipMap {
 public:
  void add(const std::string& cusip, CusipRange range);
  [[nodiscard]] const CusipRange* lookup(std::string_view cusip, Date on) const;
  [[nodiscard]] std::size_t size() const { return entries_.size(); }

  /// CSV `cusip,permanent_id,ticker,effective_from,effective_to`.
  static CusipMap load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, CusipRange>> entries_;  // sorted by (cusip, effective_from)
};

/// Parses one ownership document. Every non-derivative transaction row is
/// returned regardless of transaction code. `source_name` supplies the
/// accession id when the document carries none. Value mismatches between a
/// reported total and shares * price are appended to `warnings`.
std::vector<InsiderTransaction> parse_form4(std::string_view document, std::string_view source_name = {},
                                            std::vector<std::string>* warnings = nullptr);

/// Serializes records that share one filing (accession, issuer, owner) back
/// into the ownership-document subset accepted by parse_form4.
std::string write_form4(std::span<const InsiderTransaction> records);

/// Replaces ticker and issuer_id with the map entry covering transaction_date.
InsiderTransaction map_cusip(const InsiderTransaction& tx, const CusipMap& map);

enum class RejectReason {
  not_purchase,
  negative_lag,
  max_lag,
  min_value,
  unmapped_identifier,
  no_market_data,
  min_cap,
  max_cap,
  insufficient_volume_history,
  min_addv,
};

const char* to_string(RejectReason reason);
std::optional<RejectReason> reject_reason_from_string(std::string_view s);

struct Rejection {
  InsiderTransaction tx;
  RejectReason reason;
  std::string detail;
};

struct FilterResult {
  std::vector<InsiderTransaction> kept;
  std::vector<Rejection> rejected;
};

/// Applies the sample filters in order: code, lag, value, market cap, ADDV.
/// Market checks read only data dated at or before transaction_date.
FilterResult apply_filters(std::span<const InsiderTransaction> txs, const FilterConfig& cfg,
                           const market::MarketView& market, unsigned jobs = 1);

/// Market-free part of the chain (code, lag, value) followed by CUSIP
/// mapping. Records without a CUSIP keep the issuer and ticker printed in the
/// filing. Survivors still need apply_filters for the market checks.
FilterResult screen(std::span<const InsiderTransaction> txs, const FilterConfig& cfg, const CusipMap* map);

struct DocumentRef {
  std::string name;
  std::filesystem::path path;
};

/// Lists *.xml documents in a directory in lexicographic order. An
/// `http://host[:port]/path/` source is read as an index (one document name
/// per line at `<path>index.txt`); listed documents are downloaded into
/// `cache_dir` and the cache directory is listed instead.
std::vector<DocumentRef> fetch_filing_index(const std::string& source, const std::filesystem::path& cache_dir = {});

nlohmann::json to_json(const InsiderTransaction& tx);
InsiderTransaction transaction_from_json(const nlohmann::json& j);

void write_jsonl(const std::filesystem::path& path, std::span<const InsiderTransaction> txs);
void write_rejections_jsonl(const std::filesystem::path& path, std::span<const Rejection> rejected);
std::vector<InsiderTransaction> read_jsonl(const std::filesystem::path& path);

}  // namespace insider::filings
