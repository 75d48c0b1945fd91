#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

namespace insider {

/// Calendar date stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}
  Date(int year, unsigned month, unsigned day);

  /// Parses `YYYY-MM-DD`. Throws Error(ErrorCode::format) on anything else.
  static Date parse(std::string_view iso);

  [[nodiscard]] constexpr std::int32_t days() const { return days_; }
  [[nodiscard]] int year() const;
  [[nodiscard]] unsigned month() const;
  [[nodiscard]] unsigned day() const;
  /// 0 = Sunday ... 6 = Saturday.
  [[nodiscard]] unsigned weekday() const;
  [[nodiscard]] std::string iso() const;

  constexpr Date operator+(std::int32_t n) const { return Date(days_ + n); }
  constexpr Date operator-(std::int32_t n) const { return Date(days_ - n); }
  constexpr std::int32_t operator-(Date other) const { return days_ - other.days_; }

  constexpr auto operator<=>(const Date&) const = default;

 private:
  [[nodiscard]] std::chrono::year_month_day ymd() const;
  std::int32_t days_ = 0;
};

std::ostream& operator<<(std::ostream& os, Date d);

}  // namespace insider

template <>
struct std::hash<insider::Date> {
  std::size_t operator()(insider::Date d) const noexcept { return std::hash<std::int32_t>{}(d.days()); }
};
