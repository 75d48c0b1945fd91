#include "insider/marketdata.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "insider/error.hpp"
#include "insider/text.hpp"

namespace insider::market {

TradingCalendar::TradingCalendar(std::vector<Date> dates) : dates_(std::move(dates)) {
  for (std::size_t i = 1; i < dates_.size(); ++i)
    if (!(dates_[i - 1] < dates_[i]))
      throw Error(ErrorCode::validation, "trading calendar must be strictly increasing at " + dates_[i].iso());
}

std::optional<std::size_t> TradingCalendar::index_of(Date d) const {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end() || *it != d) return std::nullopt;
  return static_cast<std::size_t>(it - dates_.begin());
}

std::optional<std::size_t> TradingCalendar::at_or_before(Date d) const {
  auto it = std::upper_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.begin()) return std::nullopt;
  return static_cast<std::size_t>(it - dates_.begin()) - 1;
}

std::optional<std::size_t> TradingCalendar::first_after(Date d) const {
  auto it = std::upper_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - dates_.begin());
}

Date shift(const TradingCalendar& calendar, Date d, std::int64_t k) {
  const auto idx = calendar.index_of(d);
  if (!idx) throw Error(ErrorCode::range, d.iso() + " is not a trading date");
  const auto target = static_cast<std::int64_t>(*idx) + k;
  if (target < 0 || target >= static_cast<std::int64_t>(calendar.size()))
    throw Error(ErrorCode::range, "shift of " + d.iso() + " by " + std::to_string(k) + " leaves the calendar");
  return calendar.at(static_cast<std::size_t>(target));
}

MarketStore::MarketStore(BarTable bars, std::vector<FactorReturns> factors)
    : bars_(std::move(bars)), factors_(std::move(factors)) {
  std::sort(factors_.begin(), factors_.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  std::vector<Date> dates;
  dates.reserve(factors_.size());
  for (const auto& f : factors_) {
    if (!dates.empty() && dates.back() == f.date)
      throw Error(ErrorCode::duplicate_key, "duplicate factor row for " + f.date.iso());
    dates.push_back(f.date);
  }
  calendar_ = TradingCalendar(std::move(dates));
  for (auto& [ticker, series] : bars_) {
    std::sort(series.begin(), series.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < series.size(); ++i)
      if (series[i - 1].date == series[i].date)
        throw Error(ErrorCode::duplicate_key, "duplicate bar (" + ticker + ", " + series[i].date.iso() + ")");
  }
}

const std::vector<DailyBar>* MarketStore::series(std::string_view ticker) const {
  auto it = bars_.find(ticker);
  return it == bars_.end() ? nullptr : &it->second;
}

const DailyBar* MarketStore::bar_on(std::string_view ticker, Date d) const {
  const auto* s = series(ticker);
  if (!s) return nullptr;
  auto it = std::lower_bound(s->begin(), s->end(), d, [](const DailyBar& b, Date v) { return b.date < v; });
  return (it != s->end() && it->date == d) ? &*it : nullptr;
}

const DailyBar* MarketStore::bar_at_or_before(std::string_view ticker, Date d) const {
  const auto* s = series(ticker);
  if (!s) return nullptr;
  auto it = std::upper_bound(s->begin(), s->end(), d, [](Date v, const DailyBar& b) { return v < b.date; });
  return it == s->begin() ? nullptr : &*(it - 1);
}

std::span<const DailyBar> MarketStore::bars_between(std::string_view ticker, Date from, Date to) const {
  const auto* s = series(ticker);
  if (!s || to < from) return {};
  auto lo = std::lower_bound(s->begin(), s->end(), from, [](const DailyBar& b, Date v) { return b.date < v; });
  auto hi = std::upper_bound(lo, s->end(), to, [](Date v, const DailyBar& b) { return v < b.date; });
  return {&*s->begin() + (lo - s->begin()), static_cast<std::size_t>(hi - lo)};
}

const FactorReturns* MarketStore::factors_on(Date d) const {
  const auto idx = calendar_.index_of(d);
  return idx ? &factors_[*idx] : nullptr;
}

std::size_t MarketStore::bar_count() const {
  std::size_t n = 0;
  for (const auto& [_, s] : bars_) n += s.size();
  return n;
}

BarLoad load_bars(const std::filesystem::path& path) {
  text::CsvReader csv(path, {"ticker", "date", "close", "adj_close", "volume", "shares_outstanding"});
  BarLoad out;
  std::map<std::pair<std::string, Date>, std::size_t> seen;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    const auto row = csv.line();
    const auto where = path.string() + ":" + std::to_string(row);
    std::string ticker(text::trim(f[0]));
    DailyBar bar;
    try {
      bar.date = Date::parse(text::trim(f[1]));
    } catch (const Error&) {
      throw Error(ErrorCode::format, where + ": unparseable date '" + std::string(f[1]) + "'");
    }
    bar.close = text::to_double(f[2], where + " close");
    bar.adj_close = text::to_double(f[3], where + " adj_close");
    bar.volume = text::to_int(f[4], where + " volume");
    bar.shares_outstanding = text::to_double(f[5], where + " shares_outstanding");
    if (ticker.empty()) throw Error(ErrorCode::validation, where + ": empty ticker");
    if (!(bar.close > 0.0) || !(bar.adj_close > 0.0) || !std::isfinite(bar.close) || !std::isfinite(bar.adj_close))
      throw Error(ErrorCode::validation, where + ": prices must be positive");
    if (bar.volume < 0) throw Error(ErrorCode::validation, where + ": negative volume");
    if (!(bar.shares_outstanding > 0.0))
      throw Error(ErrorCode::validation, where + ": shares_outstanding must be positive");
    auto [it, inserted] = seen.emplace(std::make_pair(ticker, bar.date), row);
    if (!inserted)
      throw Error(ErrorCode::duplicate_key, where + ": duplicate (" + ticker + ", " + bar.date.iso() +
                                                ") first seen at row " + std::to_string(it->second));
    out.bars[ticker].push_back(bar);
    ++out.rows;
  }
  for (auto& [_, s] : out.bars)
    std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  return out;
}

std::vector<FactorReturns> load_factors(const std::filesystem::path& path, bool percent) {
  text::CsvReader csv(path, {"date", "mkt_rf", "smb", "hml", "rf"});
  std::vector<FactorReturns> out;
  std::vector<std::string_view> f;
  const double scale = percent ? 0.01 : 1.0;
  while (csv.next(f)) {
    const auto where = path.string() + ":" + std::to_string(csv.line());
    FactorReturns r;
    try {
      r.date = Date::parse(text::trim(f[0]));
    } catch (const Error&) {
      throw Error(ErrorCode::format, where + ": unparseable date '" + std::string(f[0]) + "'");
    }
    r.mkt_rf = text::to_double(f[1], where + " mkt_rf") * scale;
    r.smb = text::to_double(f[2], where + " smb") * scale;
    r.hml = text::to_double(f[3], where + " hml") * scale;
    r.rf = text::to_double(f[4], where + " rf") * scale;
    for (double v : {r.mkt_rf, r.smb, r.hml, r.rf})
      if (!std::isfinite(v) || std::abs(v) >= 0.5)
        throw Error(ErrorCode::validation,
                    where + ": factor value outside the +/-0.5 daily sanity bound (percent file without --percent?)");
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i - 1].date == out[i].date)
      throw Error(ErrorCode::duplicate_key, path.string() + ": duplicate factor date " + out[i].date.iso());
  return out;
}

void write_bars(const std::filesystem::path& path, const BarTable& bars) {
  std::string out = "ticker,date,close,adj_close,volume,shares_outstanding\n";
  for (const auto& [ticker, series] : bars)
    for (const auto& b : series) {
      out += ticker;
      out += ',' + b.date.iso() + ',' + text::fmt(b.close) + ',' + text::fmt(b.adj_close) + ',' +
             std::to_string(b.volume) + ',' + text::fmt(b.shares_outstanding) + '\n';
    }
  text::write_file(path, out);
}

void write_factors(const std::filesystem::path& path, std::span<const FactorReturns> factors) {
  std::string out = "date,mkt_rf,smb,hml,rf\n";
  for (const auto& f : factors)
    out += f.date.iso() + ',' + text::fmt(f.mkt_rf) + ',' + text::fmt(f.smb) + ',' + text::fmt(f.hml) + ',' +
           text::fmt(f.rf) + '\n';
  text::write_file(path, out);
}

void save_cache(const std::filesystem::path& dir, const MarketStore& store) {
  std::filesystem::create_directories(dir);
  write_bars(dir / "bars.csv", store.bars());
  write_factors(dir / "factors.csv", store.factors());
}

MarketStore load_cache(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::io, "market cache " + dir.string() + " not found");
  return MarketStore(load_bars(dir / "bars.csv").bars, load_factors(dir / "factors.csv"));
}

double simple_return(const MarketView& view, std::string_view ticker, Date d) {
  const auto idx = view.calendar().index_of(d);
  if (!idx || *idx == 0)
    throw DataGapError(std::string(ticker), {d}, "no previous trading date for return");
  const Date prev = view.calendar().at(*idx - 1);
  const auto* cur = view.bar_on(ticker, d);
  const auto* before = view.bar_on(ticker, prev);
  std::vector<Date> missing;
  if (!before) missing.push_back(prev);
  if (!cur) missing.push_back(d);
  if (!missing.empty()) throw DataGapError(std::string(ticker), std::move(missing), "missing bar for return");
  return cur->adj_close / before->adj_close - 1.0;
}

double asof_market_cap(const MarketView& view, std::string_view ticker, Date d) {
  const auto* bar = view.bar_at_or_before(ticker, d);
  if (!bar) throw DataGapError(std::string(ticker), {d}, "no bar at or before date");
  return bar->market_cap();
}

double asof_addv(const MarketView& view, std::string_view ticker, Date d, int window_days, std::size_t min_days) {
  const auto bars = view.bars_between(ticker, d - (window_days - 1), d);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& b : bars) {
    if (b.volume <= 0) continue;
    sum += b.close * static_cast<double>(b.volume);
    ++n;
  }
  if (n < min_days)
    throw Error(ErrorCode::insufficient_history, std::string(ticker) + ": " + std::to_string(n) +
                                                     " usable volume days before " + d.iso() + ", need " +
                                                     std::to_string(min_days));
  return sum / static_cast<double>(n);
}

}  // namespace insider::market
