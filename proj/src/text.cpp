#include "insider/text.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "insider/error.hpp"

namespace insider::text {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view s, std::string_view what) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    throw Error(ErrorCode::format, "cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  return v;
}

std::int64_t to_int(std::string_view s, std::string_view what) {
  s = trim(s);
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    throw Error(ErrorCode::format, "cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  return v;
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

CsvReader::CsvReader(const std::filesystem::path& path, std::vector<std::string> expected_header)
    : path_(path), contents_(read_file(path)), width_(expected_header.size()) {
  std::vector<std::string_view> header;
  if (!next(header)) throw Error(ErrorCode::format, path.string() + ": empty file, expected header");
  bool ok = header.size() == expected_header.size();
  for (std::size_t i = 0; ok && i < header.size(); ++i) ok = trim(header[i]) == expected_header[i];
  if (!ok) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorCode::format, path.string() + ": expected header '" + want + "'");
  }
}

bool CsvReader::next(std::vector<std::string_view>& fields) {
  while (pos_ < contents_.size()) {
    auto end = contents_.find('\n', pos_);
    if (end == std::string::npos) end = contents_.size();
    std::string_view line(contents_.data() + pos_, end - pos_);
    pos_ = end + 1;
    ++line_;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    fields = split(line);
    if (width_ != 0 && line_ > 1 && fields.size() != width_)
      throw Error(ErrorCode::format, path_.string() + ":" + std::to_string(line_) + ": expected " +
                                         std::to_string(width_) + " fields, got " + std::to_string(fields.size()));
    return true;
  }
  return false;
}

}  // namespace insider::text
