#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "insider/date.hpp"

namespace insider::config {

/// INI document with `<PREFIX>_<SECTION>_<KEY>` environment overrides and
/// paths resolved against the file's directory.
class Ini {
 public:
  Ini() = default;
  static Ini load(const std::filesystem::path& path, std::string env_prefix = "INSIDER");
  static Ini parse(const std::string& text, std::filesystem::path base_dir = {}, std::string env_prefix = "INSIDER");

  [[nodiscard]] std::optional<std::string> get(std::string_view section, std::string_view key) const;
  [[nodiscard]] bool has_section(std::string_view section) const;

  [[nodiscard]] std::string str(std::string_view section, std::string_view key, const std::string& fallback) const;
  [[nodiscard]] double number(std::string_view section, std::string_view key, double fallback) const;
  [[nodiscard]] long long integer(std::string_view section, std::string_view key, long long fallback) const;
  [[nodiscard]] bool flag(std::string_view section, std::string_view key, bool fallback) const;
  [[nodiscard]] Date date(std::string_view section, std::string_view key, Date fallback) const;
  [[nodiscard]] std::vector<double> numbers(std::string_view section, std::string_view key,
                                            const std::vector<double>& fallback) const;
  [[nodiscard]] std::vector<long long> integers(std::string_view section, std::string_view key,
                                                const std::vector<long long>& fallback) const;
  /// Empty when the key is absent; relative values resolve against the INI's directory.
  [[nodiscard]] std::filesystem::path path(std::string_view section, std::string_view key) const;

  /// Throws a config error for keys not listed; catches misspelt settings.
  void require_known(std::string_view section, const std::vector<std::string>& keys) const;

  [[nodiscard]] const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  boost::property_tree::ptree tree_;
  std::filesystem::path base_dir_;
  std::string env_prefix_ = "INSIDER";
};

std::vector<std::string> split_list(std::string_view s);

}  // namespace insider::config
