#include "insider/eventstudy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>

#include "insider/error.hpp"
#include "insider/parallel.hpp"
#include "insider/text.hpp"

namespace insider::eventstudy {

void LabelConfig::validate() const {
  if (horizon < 1) throw Error(ErrorCode::config, "horizon must be >= 1");
  if (!(car_threshold > 0.0)) throw Error(ErrorCode::config, "car_threshold must be positive");
  if (min_obs < 5) throw Error(ErrorCode::config, "min_obs must be >= 5");
  if (min_obs > estimation_window) throw Error(ErrorCode::config, "min_obs exceeds estimation_window");
}

std::string EventKey::str() const { return issuer_id + "|" + insider_id + "|" + disclosure_date.iso(); }

EventKey EventKey::parse(std::string_view s) {
  const auto parts = text::split(s, '|');
  if (parts.size() != 3) throw Error(ErrorCode::format, "bad event key '" + std::string(s) + "'");
  return {std::string(parts[0]), std::string(parts[1]), Date::parse(parts[2])};
}

std::vector<Event> aggregate_events(std::span<const filings::InsiderTransaction> kept) {
  std::map<EventKey, Event> groups;
  for (const auto& tx : kept) {
    EventKey key{tx.issuer_id, tx.insider_id, tx.disclosure_date};
    auto [it, inserted] = groups.try_emplace(key);
    Event& e = it->second;
    if (inserted) {
      e.key = key;
      e.ticker = tx.ticker;
      e.cusip = tx.cusip;
      e.insider_title_raw = tx.insider_title_raw;
      e.transaction_date = tx.transaction_date;
    }
    e.transaction_date = std::min(e.transaction_date, tx.transaction_date);
    e.shares += tx.shares;
    e.transaction_value += tx.transaction_value;
    e.accession_ids.push_back(tx.accession_id);
  }
  std::vector<Event> out;
  out.reserve(groups.size());
  for (auto& [_, e] : groups) {
    e.price_per_share = e.shares > 0.0 ? e.transaction_value / e.shares : 0.0;
    std::sort(e.accession_ids.begin(), e.accession_ids.end());
    e.accession_ids.erase(std::unique(e.accession_ids.begin(), e.accession_ids.end()), e.accession_ids.end());
    out.push_back(std::move(e));
  }
  return out;
}

FactorLoadings fit_ff3(const market::MarketView& market, std::string_view ticker, Date estimation_end, int window,
                       int min_obs) {
  const auto& cal = market.calendar();
  const auto end_idx = cal.at_or_before(estimation_end);
  if (!end_idx)
    throw Error(ErrorCode::insufficient_history, std::string(ticker) + ": no trading dates before " + estimation_end.iso());
  const std::size_t first = *end_idx + 1 >= static_cast<std::size_t>(window) ? *end_idx + 1 - window : 0;
  const Date base_date = first > 0 ? cal.at(first - 1) : cal.at(0);
  const auto bars = market.bars_between(ticker, base_date, cal.at(*end_idx));

  std::vector<std::array<double, 4>> rows;
  std::vector<double> y;
  rows.reserve(static_cast<std::size_t>(window));
  std::size_t b = 0;
  const market::DailyBar* prev_bar = nullptr;
  for (std::size_t i = first > 0 ? first - 1 : 0; i <= *end_idx; ++i) {
    const Date d = cal.at(i);
    while (b < bars.size() && bars[b].date < d) ++b;
    const market::DailyBar* bar = (b < bars.size() && bars[b].date == d) ? &bars[b] : nullptr;
    if (i >= first && bar && prev_bar) {
      if (const auto* f = market.factors_on(d)) {
        rows.push_back({1.0, f->mkt_rf, f->smb, f->hml});
        y.push_back(bar->adj_close / prev_bar->adj_close - 1.0 - f->rf);
      }
    }
    prev_bar = bar;
  }
  const int n = static_cast<int>(rows.size());
  if (n < min_obs)
    throw Error(ErrorCode::insufficient_history, std::string(ticker) + ": " + std::to_string(n) +
                                                     " usable estimation days ending " + cal.at(*end_idx).iso() +
                                                     ", need " + std::to_string(min_obs));

  std::vector<int> active{0};
  for (int c = 1; c < 4; ++c)
    if (std::any_of(rows.begin(), rows.end(), [c](const auto& r) { return r[c] != 0.0; })) active.push_back(c);
  const int k = static_cast<int>(active.size());
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd Y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) X(i, j) = rows[i][active[j]];
    Y(i) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < k)
    throw Error(ErrorCode::singular_design, std::string(ticker) + ": factor design is rank deficient");
  const Eigen::VectorXd coef = qr.solve(Y);
  const Eigen::VectorXd resid = Y - X * coef;
  const int dof = n - k;
  const double s2 = dof > 0 ? resid.squaredNorm() / dof : 0.0;
  const Eigen::MatrixXd cov = (X.transpose() * X).inverse() * s2;

  FactorLoadings out;
  std::array<double, 4> beta{}, se{};
  for (int j = 0; j < k; ++j) {
    beta[active[j]] = coef(j);
    se[active[j]] = std::sqrt(std::max(0.0, cov(j, j)));
  }
  out.alpha = beta[0];
  out.beta_mkt = beta[1];
  out.beta_smb = beta[2];
  out.beta_hml = beta[3];
  out.se_alpha = se[0];
  out.se_mkt = se[1];
  out.se_smb = se[2];
  out.se_hml = se[3];
  out.residual_sd = std::sqrt(s2);
  out.n_obs = n;
  out.estimation_end = cal.at(*end_idx);
  for (double v : beta)
    if (!std::isfinite(v)) throw Error(ErrorCode::singular_design, std::string(ticker) + ": non-finite loadings");
  return out;
}

namespace {

struct WindowReturns {
  std::vector<double> realized;
  std::vector<double> ar;
};

WindowReturns window_returns(const market::MarketView& market, std::string_view ticker,
                             const FactorLoadings& l, Date window_start, int horizon) {
  const auto& cal = market.calendar();
  const auto start = cal.index_of(window_start);
  if (!start || *start == 0) throw Error(ErrorCode::range, window_start.iso() + " cannot start a return window");
  const std::size_t end = *start + static_cast<std::size_t>(horizon) - 1;
  if (end >= cal.size())
    throw DataGapError(std::string(ticker), {}, "return window from " + window_start.iso() + " runs past the calendar");

  const market::DailyBar* prev = nullptr;
  {
    // The base price closes the information set; it is read as known data.
    const market::ScopedInfoSet known(market, market::InfoScope::through(cal.at(*start - 1)));
    prev = market.bar_on(ticker, cal.at(*start - 1));
  }
  const auto bars = market.bars_between(ticker, cal.at(*start), cal.at(end));
  std::vector<Date> missing;
  if (!prev) missing.push_back(cal.at(*start - 1));
  WindowReturns out;
  std::size_t b = 0;
  for (std::size_t i = *start; i <= end; ++i) {
    const Date d = cal.at(i);
    while (b < bars.size() && bars[b].date < d) ++b;
    const market::DailyBar* bar = (b < bars.size() && bars[b].date == d) ? &bars[b] : nullptr;
    const auto* f = market.factors_on(d);
    if (!bar || !f) {
      missing.push_back(d);
    } else if (prev) {
      const double r = bar->adj_close / prev->adj_close - 1.0;
      out.realized.push_back(r);
      out.ar.push_back(r - l.alpha - l.beta_mkt * f->mkt_rf - l.beta_smb * f->smb - l.beta_hml * f->hml);
    }
    prev = bar;
  }
  if (!missing.empty())
    throw DataGapError(std::string(ticker), std::move(missing), "missing data in return window");
  return out;
}

}  // namespace

std::vector<double> abnormal_returns(const market::MarketView& market, std::string_view ticker,
                                     const FactorLoadings& loadings, Date window_start, int horizon) {
  return window_returns(market, ticker, loadings, window_start, horizon).ar;
}

double sum_car(std::span<const double> ar) {
  double s = 0.0;
  for (double v : ar) s += v;
  return s;
}

EventOutcome label_event(const Event& event, const market::MarketView& market, const LabelConfig& cfg) {
  cfg.validate();
  const auto& cal = market.calendar();
  const Date disclosure = event.key.disclosure_date;
  const auto start = cal.first_after(disclosure);
  if (!start) throw DataGapError(event.ticker, {}, "no trading dates after disclosure " + disclosure.iso());

  EventOutcome out;
  out.key = event.key;
  out.horizon = cfg.horizon;
  {
    const market::ScopedInfoSet scope(market, market::InfoScope::through(disclosure));
    out.loadings = fit_ff3(market, event.ticker, disclosure, cfg.estimation_window, cfg.min_obs);
  }
  WindowReturns w;
  {
    const market::ScopedInfoSet scope(market, market::InfoScope::after(disclosure));
    w = window_returns(market, event.ticker, out.loadings, cal.at(*start), cfg.horizon);
  }
  out.ar_series = std::move(w.ar);
  if (cfg.compound) {
    double realized = 1.0, expected = 1.0;
    for (std::size_t i = 0; i < out.ar_series.size(); ++i) {
      realized *= 1.0 + w.realized[i];
      expected *= 1.0 + (w.realized[i] - out.ar_series[i]);
    }
    out.car = realized - expected;
  } else {
    out.car = sum_car(out.ar_series);
  }
  out.label = out.car > cfg.car_threshold ? 1 : 0;
  out.window_start = cal.at(*start);
  out.window_end = cal.at(*start + static_cast<std::size_t>(cfg.horizon) - 1);
  return out;
}

std::vector<LabeledEvent> label_events(std::span<const Event> events, const market::MarketView& market,
                                       const LabelConfig& cfg, unsigned jobs) {
  cfg.validate();
  std::vector<LabeledEvent> out(events.size());
  parallel_for(events.size(), jobs, [&](std::size_t i) {
    out[i].event = events[i];
    try {
      out[i].outcome = label_event(events[i], market, cfg);
    } catch (const Error& e) {
      if (cfg.strict) throw Error(e.code(), events[i].key.str() + ": " + e.detail());
      out[i].skip_reason = e.what();
    }
  });
  return out;
}

nlohmann::json to_json(const LabeledEvent& le) {
  const auto& e = le.event;
  nlohmann::json j{{"event_key",
                    {{"issuer_id", e.key.issuer_id},
                     {"insider_id", e.key.insider_id},
                     {"disclosure_date", e.key.disclosure_date.iso()}}},
                   {"ticker", e.ticker},
                   {"cusip", e.cusip},
                   {"insider_title_raw", e.insider_title_raw},
                   {"transaction_date", e.transaction_date.iso()},
                   {"shares", e.shares},
                   {"price_per_share", e.price_per_share},
                   {"transaction_value", e.transaction_value},
                   {"accession_ids", e.accession_ids}};
  if (!le.outcome) {
    j["status"] = "skipped";
    j["skip_reason"] = le.skip_reason;
    return j;
  }
  const auto& o = *le.outcome;
  j["status"] = "labeled";
  j["loadings"] = {{"alpha", o.loadings.alpha},       {"beta_mkt", o.loadings.beta_mkt},
                   {"beta_smb", o.loadings.beta_smb}, {"beta_hml", o.loadings.beta_hml},
                   {"n_obs", o.loadings.n_obs},       {"estimation_end", o.loadings.estimation_end.iso()},
                   {"se_alpha", o.loadings.se_alpha}, {"residual_sd", o.loadings.residual_sd}};
  j["horizon"] = o.horizon;
  j["window_start"] = o.window_start.iso();
  j["window_end"] = o.window_end.iso();
  j["car"] = o.car;
  j["label"] = o.label;
  j["ar_series"] = o.ar_series;
  return j;
}

LabeledEvent labeled_event_from_json(const nlohmann::json& j) {
  try {
    LabeledEvent le;
    auto& e = le.event;
    const auto& k = j.at("event_key");
    e.key = {k.at("issuer_id").get<std::string>(), k.at("insider_id").get<std::string>(),
             Date::parse(k.at("disclosure_date").get<std::string>())};
    e.ticker = j.at("ticker").get<std::string>();
    e.cusip = j.value("cusip", "");
    e.insider_title_raw = j.value("insider_title_raw", "");
    e.transaction_date = Date::parse(j.at("transaction_date").get<std::string>());
    e.shares = j.at("shares").get<double>();
    e.price_per_share = j.at("price_per_share").get<double>();
    e.transaction_value = j.at("transaction_value").get<double>();
    e.accession_ids = j.value("accession_ids", std::vector<std::string>{});
    if (j.value("status", "") != "labeled") {
      le.skip_reason = j.value("skip_reason", "unlabeled");
      return le;
    }
    EventOutcome o;
    o.key = e.key;
    const auto& l = j.at("loadings");
    o.loadings.alpha = l.at("alpha").get<double>();
    o.loadings.beta_mkt = l.at("beta_mkt").get<double>();
    o.loadings.beta_smb = l.at("beta_smb").get<double>();
    o.loadings.beta_hml = l.at("beta_hml").get<double>();
    o.loadings.n_obs = l.at("n_obs").get<int>();
    o.loadings.estimation_end = Date::parse(l.at("estimation_end").get<std::string>());
    o.loadings.se_alpha = l.value("se_alpha", 0.0);
    o.loadings.residual_sd = l.value("residual_sd", 0.0);
    o.horizon = j.at("horizon").get<int>();
    o.window_start = Date::parse(j.at("window_start").get<std::string>());
    o.window_end = Date::parse(j.at("window_end").get<std::string>());
    o.car = j.at("car").get<double>();
    o.label = j.at("label").get<int>();
    o.ar_series = j.value("ar_series", std::vector<double>{});
    le.outcome = std::move(o);
    return le;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::format, std::string("event record: ") + ex.what());
  }
}

void write_events_jsonl(const std::filesystem::path& path, std::span<const LabeledEvent> events) {
  std::string out;
  for (const auto& e : events) out += to_json(e).dump() + '\n';
  text::write_file(path, out);
}

std::vector<LabeledEvent> read_events_jsonl(const std::filesystem::path& path) {
  const auto body = text::read_file(path);
  std::vector<LabeledEvent> out;
  std::size_t line_no = 0;
  for (auto line : text::split(body, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(labeled_event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace insider::eventstudy
