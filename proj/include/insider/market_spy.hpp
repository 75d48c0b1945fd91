#pragma once

#include <cstddef>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "insider/marketdata.hpp"

namespace insider::market {

/// MarketView decorator that checks every data read against the active
/// information scope of the calling thread.
class SpyMarket final : public MarketView {
 public:
  struct Violation {
    std::string ticker;  // empty for factor reads
    Date read;
    InfoScope scope;
  };

  explicit SpyMarket(const MarketView& inner) : inner_(inner) {}

  [[nodiscard]] const TradingCalendar& calendar() const override { return inner_.calendar(); }
  [[nodiscard]] const DailyBar* bar_on(std::string_view ticker, Date d) const override;
  [[nodiscard]] const DailyBar* bar_at_or_before(std::string_view ticker, Date d) const override;
  [[nodiscard]] std::span<const DailyBar> bars_between(std::string_view ticker, Date from,
                                                       Date to) const override;
  [[nodiscard]] const FactorReturns* factors_on(Date d) const override;

  void push_scope(InfoScope scope) const override;
  void pop_scope() const override;

  [[nodiscard]] std::size_t reads() const;
  [[nodiscard]] std::size_t scoped_reads() const;
  [[nodiscard]] std::size_t violation_count() const;
  [[nodiscard]] std::vector<Violation> violations() const;
  /// Latest date observed by any read; nullopt before the first read.
  [[nodiscard]] std::optional<Date> max_read() const;
  void reset();

 private:
  void record(std::string_view ticker, Date d) const;

  const MarketView& inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::thread::id, std::vector<InfoScope>> scopes_;
  mutable std::size_t reads_ = 0;
  mutable std::size_t scoped_reads_ = 0;
  mutable std::size_t violation_count_ = 0;
  mutable std::vector<Violation> violations_;
  mutable std::optional<Date> max_read_;
};

}  // namespace insider::market
