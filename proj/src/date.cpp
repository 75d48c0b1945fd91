#include "insider/date.hpp"

#include <charconv>
#include <cstdio>

#include "insider/error.hpp"

namespace insider {

using namespace std::chrono;

Date::Date(int y, unsigned m, unsigned d) {
  const year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::format, "invalid calendar date");
  days_ = static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count());
}

Date Date::parse(std::string_view iso) {
  auto bad = [&] { return Error(ErrorCode::format, "unparseable date '" + std::string(iso) + "'"); };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw bad();
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::size_t at, std::size_t len, auto& out) {
    auto [p, ec] = std::from_chars(iso.data() + at, iso.data() + at + len, out);
    if (ec != std::errc{} || p != iso.data() + at + len) throw bad();
  };
  num(0, 4, y);
  num(5, 2, m);
  num(8, 2, d);
  const year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw bad();
  return Date(static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count()));
}

year_month_day Date::ymd() const { return year_month_day{sys_days{std::chrono::days{days_}}}; }

int Date::year() const { return static_cast<int>(ymd().year()); }
unsigned Date::month() const { return static_cast<unsigned>(ymd().month()); }
unsigned Date::day() const { return static_cast<unsigned>(ymd().day()); }
unsigned Date::weekday() const { return std::chrono::weekday{sys_days{std::chrono::days{days_}}}.c_encoding(); }

std::string Date::iso() const {
  const auto v = ymd();
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()), static_cast<unsigned>(v.month()),
                static_cast<unsigned>(v.day()));
  return buf;
}

std::ostream& operator<<(std::ostream& os, Date d) { return os << d.iso(); }

}  // namespace insider
