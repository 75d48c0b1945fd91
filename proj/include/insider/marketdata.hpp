#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "insider/date.hpp"

namespace insider::market {

/// One daily observation; the ticker is the key of the owning series.
struct DailyBar {
  Date date;
  double close = 0.0;
  double adj_close = 0.0;
  std::int64_t volume = 0;
  double shares_outstanding = 0.0;

  [[nodiscard]] double market_cap() const { return close * shares_outstanding; }
};

/// Daily Fama-French factor returns as fractions.
struct FactorReturns {
  Date date;
  double mkt_rf = 0.0;
  double smb = 0.0;
  double hml = 0.0;
  double rf = 0.0;
};

using BarTable = std::map<std::string, std::vector<DailyBar>, std::less<>>;

/// Ordered trading dates with offset arithmetic.
class TradingCalendar {
 public:
  TradingCalendar() = default;
  explicit TradingCalendar(std::vector<Date> dates);

  [[nodiscard]] std::span<const Date> dates() const { return dates_; }
  [[nodiscard]] std::size_t size() const { return dates_.size(); }
  [[nodiscard]] Date at(std::size_t i) const { return dates_.at(i); }
  [[nodiscard]] bool contains(Date d) const { return index_of(d).has_value(); }
  [[nodiscard]] std::optional<std::size_t> index_of(Date d) const;
  /// Index of the last trading date <= d.
  [[nodiscard]] std::optional<std::size_t> at_or_before(Date d) const;
  /// Index of the first trading date > d.
  [[nodiscard]] std::optional<std::size_t> first_after(Date d) const;

 private:
  std::vector<Date> dates_;
};

/// The trading date k positions from d. Throws range errors.
Date shift(const TradingCalendar& calendar, Date d, std::int64_t k);

/// Which dates a computation is allowed to read.
struct InfoScope {
  enum class Kind { through, after };
  Kind kind = Kind::through;
  Date anchor;

  static InfoScope through(Date d) { return {Kind::through, d}; }
  static InfoScope after(Date d) { return {Kind::after, d}; }
  [[nodiscard]] bool admits(Date d) const { return kind == Kind::through ? d <= anchor : d > anchor; }
};

/// Read-only point-in-time access to bars and factors.
///
/// Every downstream computation reads market data through this interface;
/// the scope hooks are no-ops except in instrumented views (see SpyMarket).
class MarketView {
 public:
  virtual ~MarketView() = default;

  [[nodiscard]] virtual const TradingCalendar& calendar() const = 0;
  [[nodiscard]] virtual const DailyBar* bar_on(std::string_view ticker, Date d) const = 0;
  [[nodiscard]] virtual const DailyBar* bar_at_or_before(std::string_view ticker, Date d) const = 0;
  /// Bars with from <= date <= to.
  [[nodiscard]] virtual std::span<const DailyBar> bars_between(std::string_view ticker, Date from,
                                                               Date to) const = 0;
  [[nodiscard]] virtual const FactorReturns* factors_on(Date d) const = 0;

  virtual void push_scope(InfoScope) const {}
  virtual void pop_scope() const {}
};

/// RAII guard declaring the information set for the enclosed reads.
class ScopedInfoSet {
 public:
  ScopedInfoSet(const MarketView& view, InfoScope scope) : view_(view) { view_.push_scope(scope); }
  ~ScopedInfoSet() { view_.pop_scope(); }
  ScopedInfoSet(const ScopedInfoSet&) = delete;
  ScopedInfoSet& operator=(const ScopedInfoSet&) = delete;

 private:
  const MarketView& view_;
};

/// Immutable in-memory store. The trading calendar is the set of factor dates.
class MarketStore final : public MarketView {
 public:
  MarketStore() = default;
  MarketStore(BarTable bars, std::vector<FactorReturns> factors);

  [[nodiscard]] const TradingCalendar& calendar() const override { return calendar_; }
  [[nodiscard]] const DailyBar* bar_on(std::string_view ticker, Date d) const override;
  [[nodiscard]] const DailyBar* bar_at_or_before(std::string_view ticker, Date d) const override;
  [[nodiscard]] std::span<const DailyBar> bars_between(std::string_view ticker, Date from,
                                                       Date to) const override;
  [[nodiscard]] const FactorReturns* factors_on(Date d) const override;

  [[nodiscard]] const BarTable& bars() const { return bars_; }
  [[nodiscard]] std::span<const FactorReturns> factors() const { return factors_; }
  [[nodiscard]] std::size_t bar_count() const;

 private:
  [[nodiscard]] const std::vector<DailyBar>* series(std::string_view ticker) const;

  BarTable bars_;
  std::vector<FactorReturns> factors_;
  TradingCalendar calendar_;
};

struct BarLoad {
  BarTable bars;
  std::size_t rows = 0;
};

/// Reads `ticker,date,close,adj_close,volume,shares_outstanding`.
BarLoad load_bars(const std::filesystem::path& path);

/// Reads `date,mkt_rf,smb,hml,rf`. With `percent`, values are divided by 100.
std::vector<FactorReturns> load_factors(const std::filesystem::path& path, bool percent = false);

void write_bars(const std::filesystem::path& path, const BarTable& bars);
void write_factors(const std::filesystem::path& path, std::span<const FactorReturns> factors);

/// Normalized cache directory (bars.csv, factors.csv in fractions).
void save_cache(const std::filesystem::path& dir, const MarketStore& store);
MarketStore load_cache(const std::filesystem::path& dir);

/// adj_close(d) / adj_close(previous trading date) - 1.
double simple_return(const MarketView& view, std::string_view ticker, Date d);

/// close * shares_outstanding at the latest bar dated <= d.
double asof_market_cap(const MarketView& view, std::string_view ticker, Date d);

/// Mean of close * volume over bars in (d - window_days, d] with nonzero volume.
double asof_addv(const MarketView& view, std::string_view ticker, Date d, int window_days,
                 std::size_t min_days = 10);

}  // namespace insider::market
