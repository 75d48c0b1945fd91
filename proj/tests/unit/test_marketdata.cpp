#include <doctest.h>

#include <cmath>
#include <fstream>

#include "insider/error.hpp"
#include "insider/market_spy.hpp"
#include "insider/marketdata.hpp"
#include "insider/rng.hpp"
#include "support.hpp"

using namespace insider;
using namespace insider::market;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& body) {
  std::ofstream out(p);
  out << body;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::internal;
}

MarketStore store_with(const std::string& ticker, const std::vector<Date>& days, const std::vector<double>& adj) {
  BarTable bars;
  for (std::size_t i = 0; i < days.size(); ++i) bars[ticker].push_back({days[i], adj[i], adj[i], 1000, 1e6});
  return MarketStore(std::move(bars), testing::zero_factors(days));
}

}  // namespace

TEST_SUITE("marketdata") {

TEST_CASE("load_bars reads rows and reports the count") {
  const auto dir = testing::scratch("md_load");
  write_text(dir / "bars.csv",
             "ticker,date,close,adj_close,volume,shares_outstanding\n"
             "ABC,2024-01-03,10.5,10.4,1000,5000000\n"
             "ABC,2024-01-02,10,9.9,2000,5000000\n");
  const auto load = load_bars(dir / "bars.csv");
  CHECK(load.rows == 2);
  REQUIRE(load.bars.at("ABC").size() == 2);
  CHECK(load.bars.at("ABC")[0].date == Date(2024, 1, 2));
  CHECK(load.bars.at("ABC")[1].close == 10.5);
  CHECK(load.bars.at("ABC")[0].volume == 2000);
}

TEST_CASE("load_bars rejects duplicates, bad prices and bad dates") {
  const auto dir = testing::scratch("md_bad");
  const std::string header = "ticker,date,close,adj_close,volume,shares_outstanding\n";
  write_text(dir / "dup.csv", header + "ABC,2024-01-02,10,10,1,1\nABC,2024-01-02,11,11,1,1\n");
  try {
    (void)load_bars(dir / "dup.csv");
    FAIL("expected duplicate_key");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::duplicate_key);
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  write_text(dir / "zero.csv", header + "ABC,2024-01-02,0,10,1,1\n");
  CHECK(code_of([&] { (void)load_bars(dir / "zero.csv"); }) == ErrorCode::validation);
  write_text(dir / "date.csv", header + "ABC,2024/01/02,10,10,1,1\n");
  CHECK(code_of([&] { (void)load_bars(dir / "date.csv"); }) == ErrorCode::format);
  write_text(dir / "header.csv", "ticker,date,close\nABC,2024-01-02,10\n");
  CHECK_THROWS_AS((void)load_bars(dir / "header.csv"), Error);
}

TEST_CASE("load_factors divides percent files only when asked") {
  const auto dir = testing::scratch("md_factors");
  write_text(dir / "f.csv", "date,mkt_rf,smb,hml,rf\n2024-01-02,1.5,-0.2,0.3,0.02\n");
  const auto frac = load_factors(dir / "f.csv", true);
  REQUIRE(frac.size() == 1);
  CHECK(frac[0].mkt_rf == doctest::Approx(0.015).epsilon(1e-15));
  CHECK(frac[0].rf == doctest::Approx(0.0002).epsilon(1e-15));
  // 1.5 as a daily fraction breaks the sanity bound.
  CHECK(code_of([&] { (void)load_factors(dir / "f.csv", false); }) == ErrorCode::validation);
}

TEST_CASE("cache round trip preserves the store") {
  const auto days = testing::weekdays(Date(2024, 1, 1), 5);
  BarTable bars;
  bars["XYZ"] = testing::flat_bars(days, 12.25, 4321, 7.5e6);
  auto factors = testing::zero_factors(days);
  factors[2].mkt_rf = 0.0125;
  const MarketStore store(bars, factors);
  const auto dir = testing::scratch("md_cache");
  save_cache(dir, store);
  const auto back = load_cache(dir);
  CHECK(back.calendar().size() == 5);
  CHECK(back.bar_count() == 5);
  CHECK(back.bar_on("XYZ", days[3])->close == 12.25);
  CHECK(back.factors_on(days[2])->mkt_rf == 0.0125);
  CHECK(code_of([&] { (void)load_cache(dir / "missing"); }) == ErrorCode::io);
}

TEST_CASE("simple_return examples") {
  const auto days = testing::weekdays(Date(2024, 3, 4), 3);
  const auto up = store_with("A", days, {100.0, 110.0, 110.0});
  CHECK(simple_return(up, "A", days[1]) == doctest::Approx(0.10).epsilon(1e-15));
  CHECK(simple_return(up, "A", days[2]) == 0.0);
  try {
    (void)simple_return(up, "A", days[0]);
    FAIL("expected data_gap");
  } catch (const DataGapError& e) {
    CHECK(e.ticker() == "A");
  }
  // A missing previous bar is named.
  BarTable bars;
  bars["B"] = {{days[0], 10, 10, 1, 1}, {days[2], 11, 11, 1, 1}};
  const MarketStore gap(bars, testing::zero_factors(days));
  try {
    (void)simple_return(gap, "B", days[2]);
    FAIL("expected data_gap");
  } catch (const DataGapError& e) {
    REQUIRE(e.missing().size() == 1);
    CHECK(e.missing()[0] == days[1]);
  }
}

TEST_CASE("asof_market_cap and asof_addv examples") {
  const auto days = testing::weekdays_between(Date(2024, 1, 1), Date(2024, 3, 29));
  BarTable bars;
  bars["C"] = testing::flat_bars(days, 10.0, 20000, 5e6);
  const MarketStore store(bars, testing::zero_factors(days));
  CHECK(asof_market_cap(store, "C", Date(2024, 2, 15)) == 50e6);
  // A weekend date falls back to Friday's bar.
  CHECK(asof_market_cap(store, "C", Date(2024, 2, 17)) == 50e6);
  CHECK_THROWS_AS((void)asof_market_cap(store, "C", Date(2023, 12, 29)), DataGapError);
  CHECK(asof_addv(store, "C", Date(2024, 3, 29), 30) == 200000.0);

  BarTable few;
  few["D"] = testing::flat_bars(testing::weekdays(Date(2024, 3, 25), 5), 10.0, 20000, 5e6);
  const MarketStore thin(few, testing::zero_factors(days));
  CHECK(code_of([&] { (void)asof_addv(thin, "D", Date(2024, 3, 29), 30, 10); }) == ErrorCode::insufficient_history);
}

TEST_CASE("asof_addv skips zero-volume days and respects the half-open window") {
  const auto days = testing::weekdays_between(Date(2024, 1, 1), Date(2024, 1, 31));
  BarTable bars;
  for (auto d : days) bars["E"].push_back({d, 2.0, 2.0, d.day() == 10 ? 0 : static_cast<std::int64_t>(d.day()), 1});
  const MarketStore store(bars, testing::zero_factors(days));
  // Window (Jan 11, Jan 31]: weekdays 12..31.
  double sum = 0.0;
  int n = 0;
  for (auto d : days)
    if (d > Date(2024, 1, 11)) sum += 2.0 * d.day(), ++n;
  CHECK(asof_addv(store, "E", Date(2024, 1, 31), 20, 5) == doctest::Approx(sum / n).epsilon(1e-15));
  // Window (Jan 1, Jan 21] contains the zero-volume day 10, which is ignored.
  sum = 0.0;
  n = 0;
  for (auto d : days)
    if (d > Date(2024, 1, 1) && d <= Date(2024, 1, 21) && d.day() != 10) sum += 2.0 * d.day(), ++n;
  CHECK(asof_addv(store, "E", Date(2024, 1, 21), 20, 5) == doctest::Approx(sum / n).epsilon(1e-15));
}

TEST_CASE("shift examples") {
  const TradingCalendar cal(testing::weekdays(Date(2024, 5, 6), 10));
  const Date friday(2024, 5, 10);
  CHECK(friday.weekday() == 5);
  CHECK(shift(cal, friday, 1) == Date(2024, 5, 13));
  CHECK(shift(cal, friday, 0) == friday);
  CHECK(shift(cal, friday, -4) == Date(2024, 5, 6));
  CHECK(code_of([&] { (void)shift(cal, Date(2024, 5, 17), 1); }) == ErrorCode::range);
  CHECK(code_of([&] { (void)shift(cal, Date(2024, 5, 11), 0); }) == ErrorCode::range);
  CHECK(code_of([&] { (void)shift(cal, Date(2024, 5, 6), -1); }) == ErrorCode::range);
}

TEST_CASE("calendar lookups") {
  const TradingCalendar cal(testing::weekdays(Date(2024, 5, 6), 10));
  CHECK(*cal.at_or_before(Date(2024, 5, 12)) == 4);
  CHECK(*cal.first_after(Date(2024, 5, 10)) == 5);
  CHECK_FALSE(cal.at_or_before(Date(2024, 5, 5)).has_value());
  CHECK_FALSE(cal.first_after(Date(2024, 5, 17)).has_value());
  CHECK_THROWS_AS(TradingCalendar({Date(2024, 1, 2), Date(2024, 1, 2)}), Error);
}

TEST_CASE("store rejects duplicate factor rows and duplicate bars") {
  const auto days = testing::weekdays(Date(2024, 1, 1), 3);
  auto f = testing::zero_factors(days);
  f.push_back(f.front());
  CHECK(code_of([&] { MarketStore s({}, f); }) == ErrorCode::duplicate_key);
  BarTable bars;
  bars["A"] = testing::flat_bars({days[0], days[0]}, 1, 1, 1);
  CHECK(code_of([&] { MarketStore s(bars, testing::zero_factors(days)); }) == ErrorCode::duplicate_key);
}

TEST_CASE("property: shift is invertible") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(1, 400));
    const TradingCalendar cal(testing::weekdays(Date(2000, 1, 1) + static_cast<int>(rng.integer(0, 5000)), n));
    for (int k = 0; k < 20; ++k) {
      const auto i = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(n) - 1));
      const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(n) - 1));
      const auto off = static_cast<std::int64_t>(j) - static_cast<std::int64_t>(i);
      const Date there = shift(cal, cal.at(i), off);
      CHECK(there == cal.at(j));
      CHECK(shift(cal, there, -off) == cal.at(i));
    }
  }
}

TEST_CASE("property: returns telescope to the price ratio") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 120));
    const auto days = testing::weekdays(Date(2010, 1, 4), n);
    std::vector<double> adj{rng.uniform(1.0, 200.0)};
    for (std::size_t i = 1; i < n; ++i) adj.push_back(adj.back() * std::exp(rng.normal(0.0, 0.03)));
    const auto store = store_with("T", days, adj);
    double growth = 1.0;
    for (std::size_t i = 1; i < n; ++i) growth *= 1.0 + simple_return(store, "T", days[i]);
    CHECK(std::abs((growth - 1.0) - (adj.back() / adj.front() - 1.0)) <= 1e-12);
  }
}

TEST_CASE("property: as-of queries never read past their date") {
  Rng rng(5);
  const auto days = testing::weekdays(Date(2015, 1, 1), 300);
  BarTable bars;
  for (auto d : days)
    if (rng.uniform() < 0.9) bars["S"].push_back({d, 5.0, 5.0, rng.integer(0, 50000), 1e6});
  const MarketStore store(bars, testing::zero_factors(days));
  const SpyMarket spy(store);
  for (int k = 0; k < 200; ++k) {
    const Date d = days[static_cast<std::size_t>(rng.integer(0, 299))] + static_cast<int>(rng.integer(0, 2));
    const ScopedInfoSet scope(spy, InfoScope::through(d));
    try {
      (void)asof_market_cap(spy, "S", d);
      (void)asof_addv(spy, "S", d, 30, 10);
    } catch (const Error&) {
    }
  }
  CHECK(spy.scoped_reads() > 0);
  CHECK(spy.violation_count() == 0);
}

TEST_CASE("spy store flags reads outside the innermost scope") {
  const auto days = testing::weekdays(Date(2024, 1, 1), 10);
  BarTable bars;
  bars["S"] = testing::flat_bars(days, 1, 1, 1);
  const MarketStore store(bars, testing::zero_factors(days));
  const SpyMarket spy(store);
  (void)spy.bar_on("S", days[9]);
  CHECK(spy.violation_count() == 0);
  {
    const ScopedInfoSet outer(spy, InfoScope::through(days[9]));
    {
      const ScopedInfoSet inner(spy, InfoScope::through(days[3]));
      (void)spy.bars_between("S", days[0], days[4]);
    }
    (void)spy.bar_on("S", days[9]);
  }
  CHECK(spy.violation_count() == 1);
  {
    const ScopedInfoSet after(spy, InfoScope::after(days[3]));
    (void)spy.factors_on(days[3]);
  }
  CHECK(spy.violation_count() == 2);
  CHECK(*spy.max_read() == days[9]);
}

}  // TEST_SUITE
