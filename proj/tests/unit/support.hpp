#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "insider/date.hpp"
#include "insider/marketdata.hpp"
#include "insider/rng.hpp"

namespace testing {

using insider::Date;

/// Mon-Fri dates starting at `from` (skipped forward to a weekday).
inline std::vector<Date> weekdays(Date from, std::size_t n) {
  std::vector<Date> out;
  for (Date d = from; out.size() < n; d = d + 1)
    if (d.weekday() != 0 && d.weekday() != 6) out.push_back(d);
  return out;
}

/// Weekdays from..to inclusive.
inline std::vector<Date> weekdays_between(Date from, Date to) {
  std::vector<Date> out;
  for (Date d = from; d <= to; d = d + 1)
    if (d.weekday() != 0 && d.weekday() != 6) out.push_back(d);
  return out;
}

inline std::vector<insider::market::FactorReturns> zero_factors(const std::vector<Date>& days) {
  std::vector<insider::market::FactorReturns> f;
  for (auto d : days) f.push_back({d, 0.0, 0.0, 0.0, 0.0});
  return f;
}

/// Flat series: every day the same close, volume and share count.
inline std::vector<insider::market::DailyBar> flat_bars(const std::vector<Date>& days, double close,
                                                        std::int64_t volume, double shares) {
  std::vector<insider::market::DailyBar> out;
  for (auto d : days) out.push_back({d, close, close, volume, shares});
  return out;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("insider_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
