#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "insider/eventstudy.hpp"
#include "insider/marketdata.hpp"

namespace insider::features {

inline constexpr std::size_t kNumFeatures = 12;

/// Fixed matrix column order.
inline constexpr std::array<std::string_view, kNumFeatures> kColumns = {
    "pct_from_52w_high",       "return_mtd", "volatility_30d",  "market_cap_at_filing",
    "pct_from_52w_low",        "avg_daily_vol_at_filing",       "is_biotech",
    "price_deviation",         "transaction_value",             "is_first_purchase_12m",
    "title_score",             "value_vs_history_ratio"};

enum Column : std::size_t {
  kPctFrom52wHigh = 0,
  kReturnMtd,
  kVolatility30d,
  kMarketCapAtFiling,
  kPctFrom52wLow,
  kAvgDailyVolAtFiling,
  kIsBiotech,
  kPriceDeviation,
  kTransactionValue,
  kIsFirstPurchase12m,
  kTitleScore,
  kValueVsHistoryRatio,
};

struct FeatureConfig {
  int range_window = 252;
  std::size_t range_min_days = 60;
  int vol_window = 30;
  std::size_t vol_min_returns = 20;
  int first_purchase_days = 365;
  /// Calendar days of purchase history for the value ratio; 0 means all prior history.
  int history_window_days = 0;
  int addv_window_days = 30;
  std::size_t addv_min_days = 10;
};

struct FeatureVector {
  eventstudy::EventKey key;
  int title_score = 1;
  double transaction_value = 0.0;
  int is_first_purchase_12m = 1;
  double value_vs_history_ratio = 1.0;
  double price_deviation = 0.0;
  double pct_from_52w_high = 0.0;
  double pct_from_52w_low = 0.0;
  double return_mtd = 0.0;
  double volatility_30d = 0.0;
  double market_cap_at_filing = 0.0;
  double avg_daily_vol_at_filing = 0.0;
  int is_biotech = 0;

  [[nodiscard]] std::array<double, kNumFeatures> row() const;
};

/// CEO=5, CFO=4, COO=3, Director=2, anything else 1; the highest match wins.
int title_score(std::string_view title_raw);

/// Unadjusted close at disclosure over the reported (value-weighted) price, minus one.
double price_deviation(const eventstudy::Event& event, const market::MarketView& market);

struct RangePosition {
  double pct_from_high = 0.0;  // <= 0
  double pct_from_low = 0.0;   // >= 0
};

RangePosition range_position(const market::MarketView& market, std::string_view ticker, Date date,
                             const FeatureConfig& cfg = {});

struct TrailingStats {
  double return_mtd = 0.0;
  double volatility_30d = 0.0;  // annualized
};

TrailingStats trailing_stats(const market::MarketView& market, std::string_view ticker, Date date,
                             const FeatureConfig& cfg = {});

struct InsiderHistory {
  int is_first_purchase_12m = 1;
  double value_vs_history_ratio = 1.0;
};

/// Purchase history per (issuer, insider), restricted to what was public at each disclosure.
class HistoryIndex {
 public:
  HistoryIndex(std::span<const eventstudy::Event> events, const FeatureConfig& cfg = {});
  [[nodiscard]] InsiderHistory lookup(const eventstudy::Event& event) const;

 private:
  struct Purchase {
    Date transaction_date;
    Date disclosure_date;
    double value;
  };
  std::unordered_map<std::string, std::vector<Purchase>> by_insider_;
  FeatureConfig cfg_;
};

InsiderHistory insider_history(const eventstudy::Event& event, std::span<const eventstudy::Event> all,
                               const FeatureConfig& cfg = {});

/// issuer_id -> biotech/pharma flag.
using SectorMap = std::unordered_map<std::string, bool>;
SectorMap load_sector_map(const std::filesystem::path& path);

/// All features for one event; every market read is dated at or before disclosure.
FeatureVector compute_features(const eventstudy::Event& event, const market::MarketView& market,
                               const SectorMap& sectors, const HistoryIndex& history, const FeatureConfig& cfg = {});

struct FeatureRow {
  eventstudy::EventKey key;
  std::array<double, kNumFeatures> x{};
  int label = 0;
  double car = 0.0;
  std::string ticker;
};

struct SkipRecord {
  eventstudy::EventKey key;
  std::string reason;
};

struct FeatureMatrix {
  std::vector<FeatureRow> rows;
  std::vector<SkipRecord> skipped;
};

/// Rows for labeled events ordered by (disclosure_date, event key); the rest become skip records.
FeatureMatrix build_matrix(std::span<const eventstudy::LabeledEvent> events, const market::MarketView& market,
                           const SectorMap& sectors, const FeatureConfig& cfg = {}, unsigned jobs = 1);

/// Feature columns followed by `event_key,label,disclosure_date`.
void write_csv(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_csv(const std::filesystem::path& path);
void write_skips_jsonl(const std::filesystem::path& path, std::span<const SkipRecord> skips);

}  // namespace insider::features
