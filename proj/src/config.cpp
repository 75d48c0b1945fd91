#include "insider/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>

#include "insider/error.hpp"
#include "insider/text.hpp"

namespace insider::config {

Ini Ini::load(const std::filesystem::path& path, std::string env_prefix) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::config, "config file not found: " + path.string());
  auto dir = path.parent_path();
  return parse(text::read_file(path), dir.empty() ? std::filesystem::path(".") : dir, std::move(env_prefix));
}

Ini Ini::parse(const std::string& contents, std::filesystem::path base_dir, std::string env_prefix) {
  Ini ini;
  std::istringstream in(contents);
  try {
    boost::property_tree::ini_parser::read_ini(in, ini.tree_);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::config, "line " + std::to_string(e.line()) + ": " + e.message());
  }
  ini.base_dir_ = std::move(base_dir);
  ini.env_prefix_ = std::move(env_prefix);
  return ini;
}

std::optional<std::string> Ini::get(std::string_view section, std::string_view key) const {
  if (!env_prefix_.empty()) {
    std::string var = env_prefix_ + "_" + std::string(section) + "_" + std::string(key);
    std::transform(var.begin(), var.end(), var.begin(), [](unsigned char c) { return std::toupper(c); });
    if (const char* v = std::getenv(var.c_str())) return std::string(v);
  }
  auto sec = tree_.get_child_optional(boost::property_tree::ptree::path_type(std::string(section), '\0'));
  if (!sec) return std::nullopt;
  auto v = sec->get_optional<std::string>(boost::property_tree::ptree::path_type(std::string(key), '\0'));
  if (!v) return std::nullopt;
  return std::string(text::trim(*v));
}

bool Ini::has_section(std::string_view section) const {
  return static_cast<bool>(tree_.get_child_optional(boost::property_tree::ptree::path_type(std::string(section), '\0')));
}

namespace {
std::string where(std::string_view section, std::string_view key) {
  return "[" + std::string(section) + "] " + std::string(key);
}
}  // namespace

std::string Ini::str(std::string_view section, std::string_view key, const std::string& fallback) const {
  auto v = get(section, key);
  return v ? *v : fallback;
}

double Ini::number(std::string_view section, std::string_view key, double fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  try {
    return text::to_double(*v, where(section, key));
  } catch (const Error& e) {
    throw Error(ErrorCode::config, e.what());
  }
}

long long Ini::integer(std::string_view section, std::string_view key, long long fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  try {
    return text::to_int(*v, where(section, key));
  } catch (const Error& e) {
    throw Error(ErrorCode::config, e.what());
  }
}

bool Ini::flag(std::string_view section, std::string_view key, bool fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw Error(ErrorCode::config, where(section, key) + ": expected a boolean, got '" + *v + "'");
}

Date Ini::date(std::string_view section, std::string_view key, Date fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  try {
    return Date::parse(*v);
  } catch (const Error& e) {
    throw Error(ErrorCode::config, where(section, key) + ": " + e.what());
  }
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (text::trim(s).empty()) return out;
  for (auto part : text::split(s, ',')) out.emplace_back(text::trim(part));
  return out;
}

std::vector<double> Ini::numbers(std::string_view section, std::string_view key,
                                 const std::vector<double>& fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  std::vector<double> out;
  try {
    for (const auto& p : split_list(*v)) out.push_back(text::to_double(p, where(section, key)));
  } catch (const Error& e) {
    throw Error(ErrorCode::config, e.what());
  }
  return out;
}

std::vector<long long> Ini::integers(std::string_view section, std::string_view key,
                                     const std::vector<long long>& fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  std::vector<long long> out;
  try {
    for (const auto& p : split_list(*v)) out.push_back(text::to_int(p, where(section, key)));
  } catch (const Error& e) {
    throw Error(ErrorCode::config, e.what());
  }
  return out;
}

std::filesystem::path Ini::path(std::string_view section, std::string_view key) const {
  auto v = get(section, key);
  if (!v || v->empty()) return {};
  std::filesystem::path p(*v);
  if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
  return p.lexically_normal();
}

void Ini::require_known(std::string_view section, const std::vector<std::string>& keys) const {
  auto sec = tree_.get_child_optional(boost::property_tree::ptree::path_type(std::string(section), '\0'));
  if (!sec) return;
  for (const auto& [k, _] : *sec)
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw Error(ErrorCode::config, "unknown setting " + where(section, k));
}

}  // namespace insider::config
