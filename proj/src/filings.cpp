#include "insider/filings.hpp"

#include <httplib.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <regex>

#include "insider/error.hpp"
#include "insider/parallel.hpp"
#include "insider/text.hpp"

namespace insider::filings {

void FilterConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw Error(ErrorCode::config, std::string("filter threshold ") + name + " must be positive");
  };
  positive(max_lag_days, "max_lag_days");
  positive(min_value, "min_value");
  positive(min_cap, "min_cap");
  positive(max_cap, "max_cap");
  positive(min_addv, "min_addv");
  positive(addv_window_days, "addv_window_days");
  if (!(min_cap < max_cap)) throw Error(ErrorCode::config, "min_cap must be below max_cap");
}

void CusipMap::add(const std::string& cusip, CusipRange range) {
  if (cusip.size() != 9) throw Error(ErrorCode::validation, "cusip '" + cusip + "' is not 9 characters");
  if (range.effective_to < range.effective_from)
    throw Error(ErrorCode::validation, "cusip " + cusip + ": effective_to precedes effective_from");
  for (const auto& [c, r] : entries_)
    if (c == cusip && !(range.effective_to < r.effective_from || r.effective_to < range.effective_from))
      throw Error(ErrorCode::validation, "cusip " + cusip + ": overlapping effective ranges");
  auto pos = std::upper_bound(entries_.begin(), entries_.end(), std::make_pair(cusip, range.effective_from),
                              [](const auto& key, const auto& e) {
                                return std::tie(key.first, key.second) < std::tie(e.first, e.second.effective_from);
                              });
  entries_.insert(pos, {cusip, std::move(range)});
}

const CusipRange* CusipMap::lookup(std::string_view cusip, Date on) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), cusip,
                             [](const auto& e, std::string_view c) { return e.first < c; });
  for (; it != entries_.end() && it->first == cusip; ++it)
    if (it->second.effective_from <= on && on <= it->second.effective_to) return &it->second;
  return nullptr;
}

CusipMap CusipMap::load(const std::filesystem::path& path) {
  text::CsvReader csv(path, {"cusip", "permanent_id", "ticker", "effective_from", "effective_to"});
  CusipMap map;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    CusipRange r{std::string(text::trim(f[1])), std::string(text::trim(f[2])), Date::parse(text::trim(f[3])),
                 Date::parse(text::trim(f[4]))};
    try {
      map.add(std::string(text::trim(f[0])), std::move(r));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(csv.line()) + ": " + e.detail());
    }
  }
  return map;
}

InsiderTransaction map_cusip(const InsiderTransaction& tx, const CusipMap& map) {
  if (tx.cusip.empty()) throw Error(ErrorCode::validation, tx.accession_id + ": transaction has no cusip");
  const auto* entry = map.lookup(tx.cusip, tx.transaction_date);
  if (!entry)
    throw Error(ErrorCode::unmapped_identifier,
                "cusip " + tx.cusip + " has no mapping covering " + tx.transaction_date.iso());
  InsiderTransaction out = tx;
  out.issuer_id = entry->permanent_id;
  out.ticker = entry->ticker;
  return out;
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::not_purchase: return "not_purchase";
    case RejectReason::negative_lag: return "negative_lag";
    case RejectReason::max_lag: return "max_lag";
    case RejectReason::min_value: return "min_value";
    case RejectReason::unmapped_identifier: return "unmapped_identifier";
    case RejectReason::no_market_data: return "no_market_data";
    case RejectReason::min_cap: return "min_cap";
    case RejectReason::max_cap: return "max_cap";
    case RejectReason::insufficient_volume_history: return "insufficient_volume_history";
    case RejectReason::min_addv: return "min_addv";
  }
  return "unknown";
}

std::optional<RejectReason> reject_reason_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(RejectReason::min_addv); ++i) {
    const auto r = static_cast<RejectReason>(i);
    if (s == to_string(r)) return r;
  }
  return std::nullopt;
}

namespace {

struct Verdict {
  std::optional<RejectReason> reason;
  std::string detail;
};

Verdict judge_static(const InsiderTransaction& tx, const FilterConfig& cfg) {
  if (tx.transaction_code != 'P') return {RejectReason::not_purchase, std::string(1, tx.transaction_code)};
  const auto lag = tx.disclosure_date - tx.transaction_date;
  if (lag < 0) return {RejectReason::negative_lag, std::to_string(lag)};
  if (lag > cfg.max_lag_days) return {RejectReason::max_lag, std::to_string(lag)};
  if (tx.transaction_value < cfg.min_value) return {RejectReason::min_value, text::fmt(tx.transaction_value)};
  return {};
}

Verdict judge(const InsiderTransaction& tx, const FilterConfig& cfg, const market::MarketView& market) {
  if (auto v = judge_static(tx, cfg); v.reason) return v;

  const market::ScopedInfoSet scope(market, market::InfoScope::through(tx.transaction_date));
  double cap;
  try {
    cap = market::asof_market_cap(market, tx.ticker, tx.transaction_date);
  } catch (const DataGapError& e) {
    if (cfg.strict) throw;
    return {RejectReason::no_market_data, e.what()};
  }
  if (cap < cfg.min_cap) return {RejectReason::min_cap, text::fmt(cap)};
  if (cap > cfg.max_cap) return {RejectReason::max_cap, text::fmt(cap)};
  double addv;
  try {
    addv = market::asof_addv(market, tx.ticker, tx.transaction_date, cfg.addv_window_days, cfg.min_addv_days);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::insufficient_history) throw;
    return {RejectReason::insufficient_volume_history, e.what()};
  }
  if (addv < cfg.min_addv) return {RejectReason::min_addv, text::fmt(addv)};
  return {};
}

}  // namespace

FilterResult apply_filters(std::span<const InsiderTransaction> txs, const FilterConfig& cfg,
                           const market::MarketView& market, unsigned jobs) {
  cfg.validate();
  std::vector<Verdict> verdicts(txs.size());
  parallel_for(txs.size(), jobs, [&](std::size_t i) { verdicts[i] = judge(txs[i], cfg, market); });
  FilterResult out;
  for (std::size_t i = 0; i < txs.size(); ++i) {
    if (verdicts[i].reason)
      out.rejected.push_back({txs[i], *verdicts[i].reason, std::move(verdicts[i].detail)});
    else
      out.kept.push_back(txs[i]);
  }
  return out;
}

FilterResult screen(std::span<const InsiderTransaction> txs, const FilterConfig& cfg, const CusipMap* map) {
  cfg.validate();
  FilterResult out;
  for (const auto& tx : txs) {
    auto v = judge_static(tx, cfg);
    if (v.reason) {
      out.rejected.push_back({tx, *v.reason, std::move(v.detail)});
      continue;
    }
    if (!map || tx.cusip.empty()) {
      out.kept.push_back(tx);
      continue;
    }
    try {
      out.kept.push_back(map_cusip(tx, *map));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::unmapped_identifier) throw;
      out.rejected.push_back({tx, RejectReason::unmapped_identifier, e.what()});
    }
  }
  return out;
}

namespace {

std::vector<DocumentRef> list_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw Error(ErrorCode::io, "filing source " + dir.string() + " is not a readable directory");
  std::vector<DocumentRef> out;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot list " + dir.string() + ": " + ec.message());
  for (const auto& entry : it) {
    if (!entry.is_regular_file() || entry.path().extension() != ".xml") continue;
    out.push_back({entry.path().filename().string(), entry.path()});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

std::vector<DocumentRef> fetch_remote(const std::string& source, const std::filesystem::path& cache_dir) {
  static const std::regex url(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(source, m, url)) throw Error(ErrorCode::config, "unsupported filing source " + source);
  if (cache_dir.empty()) throw Error(ErrorCode::config, "remote filing source needs a cache directory");
  std::string base = m[2].matched ? m[2].str() : "/";
  if (base.back() != '/') base += '/';
  httplib::Client client(m[1].str());
  client.set_connection_timeout(10);
  auto index = client.Get((base + "index.txt").c_str());
  if (!index || index->status != 200)
    throw Error(ErrorCode::io, "cannot fetch filing index from " + source);
  std::filesystem::create_directories(cache_dir);
  for (auto name : text::split(index->body, '\n')) {
    name = text::trim(name);
    if (name.empty()) continue;
    if (name.find('/') != std::string_view::npos || name.find("..") != std::string_view::npos)
      throw Error(ErrorCode::validation, "refusing index entry '" + std::string(name) + "'");
    auto doc = client.Get((base + std::string(name)).c_str());
    if (!doc || doc->status != 200) throw Error(ErrorCode::io, "cannot fetch " + std::string(name) + " from " + source);
    text::write_file(cache_dir / std::string(name), doc->body);
  }
  return list_directory(cache_dir);
}

}  // namespace

std::vector<DocumentRef> fetch_filing_index(const std::string& source, const std::filesystem::path& cache_dir) {
  if (source.rfind("http://", 0) == 0) return fetch_remote(source, cache_dir);
  return list_directory(source);
}

nlohmann::json to_json(const InsiderTransaction& tx) {
  return nlohmann::json{{"accession_id", tx.accession_id},
                        {"issuer_id", tx.issuer_id},
                        {"cusip", tx.cusip},
                        {"ticker", tx.ticker},
                        {"insider_id", tx.insider_id},
                        {"insider_title_raw", tx.insider_title_raw},
                        {"transaction_date", tx.transaction_date.iso()},
                        {"disclosure_date", tx.disclosure_date.iso()},
                        {"transaction_code", std::string(1, tx.transaction_code)},
                        {"shares", tx.shares},
                        {"price_per_share", tx.price_per_share},
                        {"transaction_value", tx.transaction_value}};
}

InsiderTransaction transaction_from_json(const nlohmann::json& j) {
  try {
    InsiderTransaction tx;
    tx.accession_id = j.at("accession_id").get<std::string>();
    tx.issuer_id = j.at("issuer_id").get<std::string>();
    tx.cusip = j.at("cusip").get<std::string>();
    tx.ticker = j.at("ticker").get<std::string>();
    tx.insider_id = j.at("insider_id").get<std::string>();
    tx.insider_title_raw = j.at("insider_title_raw").get<std::string>();
    tx.transaction_date = Date::parse(j.at("transaction_date").get<std::string>());
    tx.disclosure_date = Date::parse(j.at("disclosure_date").get<std::string>());
    const auto code = j.at("transaction_code").get<std::string>();
    if (code.size() != 1) throw Error(ErrorCode::validation, "transaction_code must be one character");
    tx.transaction_code = code[0];
    tx.shares = j.at("shares").get<double>();
    tx.price_per_share = j.at("price_per_share").get<double>();
    tx.transaction_value = j.at("transaction_value").get<double>();
    return tx;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format, std::string("transaction record: ") + e.what());
  }
}

void write_jsonl(const std::filesystem::path& path, std::span<const InsiderTransaction> txs) {
  std::string out;
  for (const auto& tx : txs) out += to_json(tx).dump() + '\n';
  text::write_file(path, out);
}

void write_rejections_jsonl(const std::filesystem::path& path, std::span<const Rejection> rejected) {
  std::string out;
  for (const auto& r : rejected) {
    auto j = to_json(r.tx);
    j["reject_reason"] = to_string(r.reason);
    out += j.dump() + '\n';
  }
  text::write_file(path, out);
}

std::vector<InsiderTransaction> read_jsonl(const std::filesystem::path& path) {
  const auto body = text::read_file(path);
  std::vector<InsiderTransaction> out;
  std::size_t line_no = 0;
  for (auto line : text::split(body, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(transaction_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace insider::filings
