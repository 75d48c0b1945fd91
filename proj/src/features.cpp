#include "insider/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <nlohmann/json.hpp>

#include "insider/error.hpp"
#include "insider/parallel.hpp"
#include "insider/text.hpp"

namespace insider::features {

std::array<double, kNumFeatures> FeatureVector::row() const {
  std::array<double, kNumFeatures> r{};
  r[kPctFrom52wHigh] = pct_from_52w_high;
  r[kReturnMtd] = return_mtd;
  r[kVolatility30d] = volatility_30d;
  r[kMarketCapAtFiling] = market_cap_at_filing;
  r[kPctFrom52wLow] = pct_from_52w_low;
  r[kAvgDailyVolAtFiling] = avg_daily_vol_at_filing;
  r[kIsBiotech] = is_biotech;
  r[kPriceDeviation] = price_deviation;
  r[kTransactionValue] = transaction_value;
  r[kIsFirstPurchase12m] = is_first_purchase_12m;
  r[kTitleScore] = title_score;
  r[kValueVsHistoryRatio] = value_vs_history_ratio;
  return r;
}

int title_score(std::string_view title_raw) {
  std::string lower(title_raw);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  std::vector<std::string> words;
  std::string cur;
  for (char c : lower) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += c;
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  auto has_word = [&](std::string_view w) { return std::find(words.begin(), words.end(), w) != words.end(); };
  auto has_phrase = [&](std::string_view a, std::string_view b) {
    for (std::size_t i = 0; i + 1 < words.size(); ++i)
      if (words[i] == a && words[i + 1] == b) return true;
    return false;
  };
  if (has_word("ceo") || has_phrase("chief", "executive")) return 5;
  if (has_word("cfo") || has_phrase("chief", "financial")) return 4;
  if (has_word("coo") || has_phrase("chief", "operating")) return 3;
  if (has_word("director") || has_word("directors")) return 2;
  return 1;
}

namespace {

const market::DailyBar& bar_at_trading_date(const market::MarketView& market, std::string_view ticker, Date date,
                                            Date* resolved = nullptr) {
  const auto idx = market.calendar().at_or_before(date);
  if (!idx) throw DataGapError(std::string(ticker), {date}, "no trading date at or before");
  const Date d = market.calendar().at(*idx);
  const auto* bar = market.bar_on(ticker, d);
  if (!bar) throw DataGapError(std::string(ticker), {d}, "missing bar");
  if (resolved) *resolved = d;
  return *bar;
}

}  // namespace

double price_deviation(const eventstudy::Event& event, const market::MarketView& market) {
  if (!(event.price_per_share > 0.0))
    throw Error(ErrorCode::validation, event.key.str() + ": transaction price must be positive");
  const auto& bar = bar_at_trading_date(market, event.ticker, event.key.disclosure_date);
  return bar.close / event.price_per_share - 1.0;
}

RangePosition range_position(const market::MarketView& market, std::string_view ticker, Date date,
                             const FeatureConfig& cfg) {
  Date d;
  const auto& today = bar_at_trading_date(market, ticker, date, &d);
  const auto& cal = market.calendar();
  const auto end = *cal.index_of(d);
  const std::size_t start = end + 1 >= static_cast<std::size_t>(cfg.range_window) ? end + 1 - cfg.range_window : 0;
  const auto bars = market.bars_between(ticker, cal.at(start), d);
  if (bars.size() < cfg.range_min_days)
    throw Error(ErrorCode::insufficient_history, std::string(ticker) + ": " + std::to_string(bars.size()) +
                                                     " bars in the 52-week window ending " + d.iso());
  double hi = bars.front().adj_close, lo = bars.front().adj_close;
  for (const auto& b : bars) {
    hi = std::max(hi, b.adj_close);
    lo = std::min(lo, b.adj_close);
  }
  return {today.adj_close / hi - 1.0, today.adj_close / lo - 1.0};
}

TrailingStats trailing_stats(const market::MarketView& market, std::string_view ticker, Date date,
                             const FeatureConfig& cfg) {
  Date d;
  const auto& today = bar_at_trading_date(market, ticker, date, &d);
  const auto& cal = market.calendar();
  const auto end = *cal.index_of(d);

  TrailingStats out;
  const Date month_start(d.year(), d.month(), 1);
  const auto base_idx = cal.at_or_before(month_start - 1);
  if (!base_idx) throw Error(ErrorCode::insufficient_history, std::string(ticker) + ": no prior month-end before " + d.iso());
  const auto* base = market.bar_on(ticker, cal.at(*base_idx));
  if (!base)
    throw Error(ErrorCode::insufficient_history,
                std::string(ticker) + ": no bar on prior month-end " + cal.at(*base_idx).iso());
  out.return_mtd = today.adj_close / base->adj_close - 1.0;

  const auto window = static_cast<std::size_t>(cfg.vol_window);
  const std::size_t first = end >= window ? end - window : 0;
  const auto bars = market.bars_between(ticker, cal.at(first), d);
  std::vector<double> logs;
  std::size_t b = 0;
  const market::DailyBar* prev = nullptr;
  for (std::size_t i = first; i <= end; ++i) {
    const Date day = cal.at(i);
    while (b < bars.size() && bars[b].date < day) ++b;
    const market::DailyBar* bar = (b < bars.size() && bars[b].date == day) ? &bars[b] : nullptr;
    if (i > first && bar && prev) logs.push_back(std::log(bar->adj_close / prev->adj_close));
    prev = bar;
  }
  if (logs.size() < cfg.vol_min_returns || logs.size() < 2)
    throw Error(ErrorCode::insufficient_history, std::string(ticker) + ": " + std::to_string(logs.size()) +
                                                     " daily returns in the volatility window ending " + d.iso());
  double mean = 0.0;
  for (double v : logs) mean += v;
  mean /= static_cast<double>(logs.size());
  double ss = 0.0;
  for (double v : logs) ss += (v - mean) * (v - mean);
  out.volatility_30d = std::sqrt(ss / static_cast<double>(logs.size() - 1)) * std::sqrt(252.0);
  return out;
}

namespace {
std::string insider_key(const eventstudy::Event& e) { return e.key.issuer_id + '\x1f' + e.key.insider_id; }
}  // namespace

HistoryIndex::HistoryIndex(std::span<const eventstudy::Event> events, const FeatureConfig& cfg) : cfg_(cfg) {
  for (const auto& e : events)
    by_insider_[insider_key(e)].push_back({e.transaction_date, e.key.disclosure_date, e.transaction_value});
  for (auto& [_, v] : by_insider_)
    std::sort(v.begin(), v.end(), [](const Purchase& a, const Purchase& b) {
      return std::tie(a.transaction_date, a.disclosure_date, a.value) <
             std::tie(b.transaction_date, b.disclosure_date, b.value);
    });
}

InsiderHistory HistoryIndex::lookup(const eventstudy::Event& event) const {
  InsiderHistory out;
  auto it = by_insider_.find(insider_key(event));
  if (it == by_insider_.end()) return out;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : it->second) {
    if (!(p.transaction_date < event.transaction_date)) break;
    // A purchase disclosed after this event's disclosure was not public yet.
    if (event.key.disclosure_date < p.disclosure_date) continue;
    if (event.transaction_date - p.transaction_date <= cfg_.first_purchase_days) out.is_first_purchase_12m = 0;
    if (cfg_.history_window_days > 0 && event.transaction_date - p.transaction_date > cfg_.history_window_days) continue;
    sum += p.value;
    ++n;
  }
  if (n > 0 && sum > 0.0) out.value_vs_history_ratio = event.transaction_value / (sum / static_cast<double>(n));
  return out;
}

InsiderHistory insider_history(const eventstudy::Event& event, std::span<const eventstudy::Event> all,
                               const FeatureConfig& cfg) {
  return HistoryIndex(all, cfg).lookup(event);
}

SectorMap load_sector_map(const std::filesystem::path& path) {
  text::CsvReader csv(path, {"issuer_id", "is_biotech"});
  SectorMap out;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    const auto flag = text::trim(f[1]);
    if (flag != "0" && flag != "1")
      throw Error(ErrorCode::format, path.string() + ":" + std::to_string(csv.line()) + ": is_biotech must be 0 or 1");
    out[std::string(text::trim(f[0]))] = flag == "1";
  }
  return out;
}

FeatureVector compute_features(const eventstudy::Event& event, const market::MarketView& market,
                               const SectorMap& sectors, const HistoryIndex& history, const FeatureConfig& cfg) {
  const Date disclosure = event.key.disclosure_date;
  const market::ScopedInfoSet scope(market, market::InfoScope::through(disclosure));
  FeatureVector fv;
  fv.key = event.key;
  fv.title_score = title_score(event.insider_title_raw);
  fv.transaction_value = event.transaction_value;
  const auto hist = history.lookup(event);
  fv.is_first_purchase_12m = hist.is_first_purchase_12m;
  fv.value_vs_history_ratio = hist.value_vs_history_ratio;
  fv.price_deviation = price_deviation(event, market);
  const auto range = range_position(market, event.ticker, disclosure, cfg);
  fv.pct_from_52w_high = range.pct_from_high;
  fv.pct_from_52w_low = range.pct_from_low;
  const auto trailing = trailing_stats(market, event.ticker, disclosure, cfg);
  fv.return_mtd = trailing.return_mtd;
  fv.volatility_30d = trailing.volatility_30d;
  fv.market_cap_at_filing = market::asof_market_cap(market, event.ticker, disclosure);
  fv.avg_daily_vol_at_filing =
      market::asof_addv(market, event.ticker, disclosure, cfg.addv_window_days, cfg.addv_min_days);
  auto s = sectors.find(event.key.issuer_id);
  fv.is_biotech = (s != sectors.end() && s->second) ? 1 : 0;
  for (double v : fv.row())
    if (!std::isfinite(v)) throw Error(ErrorCode::validation, event.key.str() + ": non-finite feature");
  return fv;
}

FeatureMatrix build_matrix(std::span<const eventstudy::LabeledEvent> events, const market::MarketView& market,
                           const SectorMap& sectors, const FeatureConfig& cfg, unsigned jobs) {
  std::vector<eventstudy::Event> all;
  all.reserve(events.size());
  for (const auto& e : events) all.push_back(e.event);
  const HistoryIndex history(all, cfg);

  std::vector<std::size_t> order(events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ka = events[a].event.key;
    const auto& kb = events[b].event.key;
    return std::tie(ka.disclosure_date, ka) < std::tie(kb.disclosure_date, kb);
  });

  struct Slot {
    std::optional<FeatureRow> row;
    std::string reason;
  };
  std::vector<Slot> slots(order.size());
  parallel_for(order.size(), jobs, [&](std::size_t i) {
    const auto& le = events[order[i]];
    if (!le.outcome) {
      slots[i].reason = "unlabeled: " + le.skip_reason;
      return;
    }
    try {
      const auto fv = compute_features(le.event, market, sectors, history, cfg);
      slots[i].row = FeatureRow{le.event.key, fv.row(), le.outcome->label, le.outcome->car, le.event.ticker};
    } catch (const Error& e) {
      slots[i].reason = e.what();
    }
  });
  FeatureMatrix m;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].row)
      m.rows.push_back(std::move(*slots[i].row));
    else
      m.skipped.push_back({events[order[i]].event.key, std::move(slots[i].reason)});
  }
  return m;
}

void write_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
  std::string out;
  for (auto c : kColumns) out += std::string(c) + ',';
  out += "event_key,label,disclosure_date\n";
  for (const auto& r : m.rows) {
    for (double v : r.x) out += text::fmt(v) + ',';
    out += r.key.str() + ',' + std::to_string(r.label) + ',' + r.key.disclosure_date.iso() + '\n';
  }
  text::write_file(path, out);
}

FeatureMatrix read_csv(const std::filesystem::path& path) {
  std::vector<std::string> header(kColumns.begin(), kColumns.end());
  header.insert(header.end(), {"event_key", "label", "disclosure_date"});
  text::CsvReader csv(path, header);
  FeatureMatrix m;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    FeatureRow r;
    const auto where = path.string() + ":" + std::to_string(csv.line());
    for (std::size_t j = 0; j < kNumFeatures; ++j) r.x[j] = text::to_double(f[j], where + " " + std::string(kColumns[j]));
    r.key = eventstudy::EventKey::parse(text::trim(f[kNumFeatures]));
    r.label = static_cast<int>(text::to_int(f[kNumFeatures + 1], where + " label"));
    if (r.label != 0 && r.label != 1) throw Error(ErrorCode::format, where + ": label must be 0 or 1");
    if (Date::parse(text::trim(f[kNumFeatures + 2])) != r.key.disclosure_date)
      throw Error(ErrorCode::format, where + ": disclosure_date disagrees with event_key");
    m.rows.push_back(std::move(r));
  }
  return m;
}

void write_skips_jsonl(const std::filesystem::path& path, std::span<const SkipRecord> skips) {
  std::string out;
  for (const auto& s : skips) out += nlohmann::json{{"event_key", s.key.str()}, {"reason", s.reason}}.dump() + '\n';
  text::write_file(path, out);
}

}  // namespace insider::features
