#include "insider/market_spy.hpp"

namespace insider::market {

void SpyMarket::record(std::string_view ticker, Date d) const {
  std::lock_guard lock(mu_);
  ++reads_;
  if (!max_read_ || *max_read_ < d) max_read_ = d;
  auto it = scopes_.find(std::this_thread::get_id());
  if (it == scopes_.end() || it->second.empty()) return;
  ++scoped_reads_;
  // Only the innermost scope applies; nested scopes declare narrower intent.
  const auto& scope = it->second.back();
  if (scope.admits(d)) return;
  ++violation_count_;
  if (violations_.size() < 64) violations_.push_back({std::string(ticker), d, scope});
}

const DailyBar* SpyMarket::bar_on(std::string_view ticker, Date d) const {
  record(ticker, d);
  return inner_.bar_on(ticker, d);
}

const DailyBar* SpyMarket::bar_at_or_before(std::string_view ticker, Date d) const {
  const auto* bar = inner_.bar_at_or_before(ticker, d);
  record(ticker, d);
  if (bar && bar->date != d) record(ticker, bar->date);
  return bar;
}

std::span<const DailyBar> SpyMarket::bars_between(std::string_view ticker, Date from, Date to) const {
  record(ticker, from);
  record(ticker, to);
  return inner_.bars_between(ticker, from, to);
}

const FactorReturns* SpyMarket::factors_on(Date d) const {
  record({}, d);
  return inner_.factors_on(d);
}

void SpyMarket::push_scope(InfoScope scope) const {
  std::lock_guard lock(mu_);
  scopes_[std::this_thread::get_id()].push_back(scope);
}

void SpyMarket::pop_scope() const {
  std::lock_guard lock(mu_);
  auto& stack = scopes_[std::this_thread::get_id()];
  if (!stack.empty()) stack.pop_back();
}

std::size_t SpyMarket::reads() const {
  std::lock_guard lock(mu_);
  return reads_;
}

std::size_t SpyMarket::scoped_reads() const {
  std::lock_guard lock(mu_);
  return scoped_reads_;
}

std::size_t SpyMarket::violation_count() const {
  std::lock_guard lock(mu_);
  return violation_count_;
}

std::vector<SpyMarket::Violation> SpyMarket::violations() const {
  std::lock_guard lock(mu_);
  return violations_;
}

std::optional<Date> SpyMarket::max_read() const {
  std::lock_guard lock(mu_);
  return max_read_;
}

void SpyMarket::reset() {
  std::lock_guard lock(mu_);
  reads_ = scoped_reads_ = violation_count_ = 0;
  violations_.clear();
  max_read_.reset();
}

}  // namespace insider::market
