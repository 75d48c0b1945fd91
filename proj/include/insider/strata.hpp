#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "insider/eventstudy.hpp"
#include "insider/marketdata.hpp"
#include "insider/stats.hpp"

namespace insider::strata {

/// Interior edges; buckets are (-inf, e0], (e0, e1], ..., (e_last, +inf).
struct BucketSpec {
  std::vector<double> edges{0.0, 0.03, 0.05, 0.10};

  void validate() const;
  [[nodiscard]] std::size_t size() const { return edges.size() + 1; }
  [[nodiscard]] std::size_t bucket_of(double price_deviation) const;
  /// "≤ 0%", "0%–3%", ..., "> 10%".
  [[nodiscard]] std::string label(std::size_t bucket) const;
};

struct StrataEvent {
  std::string issuer_id;
  double price_deviation = 0.0;
  double car = 0.0;
  int label = 0;
};

struct BucketStats {
  std::string label;
  std::size_t n = 0;
  std::size_t n_tickers = 0;
  std::optional<double> mean_car;
  std::optional<double> ci95_half_width;  // n >= 2
  std::optional<double> prob_outperform;
  std::optional<double> median_car;
  std::optional<double> winsorized_mean_car;
};

struct StrataTable {
  int horizon = 30;
  std::string partition = "all";
  std::size_t n_events = 0;
  std::vector<BucketStats> buckets;
  /// Lowest versus highest bucket; absent when either side cannot support the test.
  std::optional<stats::WelchResult> extreme_test;
  std::string extreme_test_note;
};

std::vector<BucketStats> bucketize(std::span<const StrataEvent> events, const BucketSpec& spec = {});
StrataTable make_table(std::span<const StrataEvent> events, const BucketSpec& spec, int horizon,
                       std::string partition = "all");

using RegimeSeries = std::map<Date, double>;
/// CSV `date,value`.
RegimeSeries load_regime(const std::filesystem::path& path);

struct SweepConfig {
  std::vector<int> horizons{20, 30, 60};
  int regime_horizon = 30;
  double regime_threshold = 20.0;
  BucketSpec buckets;
  eventstudy::LabelConfig label;
  unsigned jobs = 1;
};

struct SweepSkip {
  eventstudy::EventKey key;
  int horizon = 0;
  std::string reason;
};

struct SweepReport {
  std::vector<StrataTable> tables;
  std::vector<SweepSkip> skipped;
  std::size_t regime_unmatched = 0;
};

/// Re-labels every event per horizon and tabulates each; optionally splits one horizon by regime.
SweepReport robustness_sweep(std::span<const eventstudy::Event> events,
                             const std::unordered_map<std::string, double>& price_deviation_by_key,
                             const market::MarketView& market, const SweepConfig& cfg,
                             const RegimeSeries* regime = nullptr);

/// Columns: price_deviation,n,tickers,mean_car,ci95_half_width,pr_car_gt_threshold.
void write_table_csv(const std::filesystem::path& path, const StrataTable& table);
/// Robust statistics and the extreme-bucket test.
void write_detail_csv(const std::filesystem::path& path, const StrataTable& table);
nlohmann::json to_json(const StrataTable& table);
nlohmann::json to_json(const SweepReport& report);

}  // namespace insider::strata
