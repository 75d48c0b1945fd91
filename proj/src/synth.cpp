#include "insider/synth.hpp"

#include <algorithm>
#include <array>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numeric>
#include <tuple>

#include "insider/config.hpp"
#include "insider/error.hpp"
#include "insider/eventstudy.hpp"
#include "insider/filings.hpp"
#include "insider/marketdata.hpp"
#include "insider/rng.hpp"
#include "insider/strata.hpp"
#include "insider/text.hpp"

namespace insider::synth {

namespace {

constexpr int kMaxLag = 5;
constexpr int kWindow = 60;                   // longest outcome horizon planted
constexpr int kSlot = kMaxLag + kWindow + 1;  // trading days an event occupies
constexpr int kEstimation = 252;
constexpr double kCapLo = 45e6, kCapHi = 450e6;

const std::array<const char*, 12> kTitles = {
    "Chief Executive Officer", "President and CEO", "CFO",      "Chief Financial Officer",
    "Chief Operating Officer", "Director",          "Director", "Director",
    "10% Owner",               "VP, Business Development",      "General Counsel", "Chairman of the Board"};

std::vector<Date> trading_days(Date from, Date to) {
  std::vector<Date> out;
  for (Date d = from; d <= to; d = d + 1) {
    const auto wd = d.weekday();
    if (wd == 0 || wd == 6) continue;
    if ((d.month() == 1 && d.day() == 1) || (d.month() == 12 && d.day() == 25)) continue;
    out.push_back(d);
  }
  return out;
}

double probit(double q) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * q); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double gamma_draw(Rng& rng, int shape, double mean) {
  double s = 0.0;
  for (int i = 0; i < shape; ++i) s += rng.exponential(mean / shape);
  return s;
}

/// Normal score of x against every value seen so far, then x joins the reference set.
class RunningNormalScore {
 public:
  double score(double x) {
    const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), x);
    const auto hi = std::upper_bound(lo, sorted_.end(), x);
    const double rank = static_cast<double>(lo - sorted_.begin()) + 0.5 * static_cast<double>(hi - lo);
    const double q = (rank + 0.5) / (static_cast<double>(sorted_.size()) + 1.0);
    sorted_.insert(hi, x);
    return probit(q);
  }

 private:
  std::vector<double> sorted_;
};

// Ordinary least squares through the normal equations with partial pivoting.
std::array<double, 4> ols4(const std::vector<std::array<double, 4>>& x, const std::vector<double>& y) {
  double a[4][5] = {};
  for (std::size_t i = 0; i < x.size(); ++i)
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) a[r][c] += x[i][r] * x[i][c];
      a[r][4] += x[i][r] * y[i];
    }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    for (int c = 0; c < 5; ++c) std::swap(a[col][c], a[piv][c]);
    if (a[col][col] == 0.0) throw Error(ErrorCode::internal, "synthetic factor design is singular");
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return {a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]};
}

std::string padded(unsigned long long v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*llu", width, v);
  return buf;
}

std::string ticker_for(std::size_t i) {
  std::string t(4, 'A');
  for (int k = 3; k >= 0; --k) {
    t[static_cast<std::size_t>(k)] = static_cast<char>('A' + i % 26);
    i /= 26;
  }
  return "Z" + t;
}

double round_cents(double v) { return std::max(0.01, std::round(v * 100.0) / 100.0); }

nlohmann::json config_json(const SynthConfig& c) {
  return {{"n_issuers", c.n_issuers},
          {"n_events", c.n_events},
          {"seed", c.seed},
          {"start", c.start.iso()},
          {"end", c.end.iso()},
          {"planted",
           {{"w_52w_high", c.planted.w_52w_high},
            {"w_price_dev", c.planted.w_price_dev},
            {"w_interaction", c.planted.w_interaction},
            {"base_rate", c.planted.base_rate},
            {"noise_sd", c.planted.noise_sd}}},
          {"bucket_effect", c.bucket_effect},
          {"bucket_weights", c.bucket_weights},
          {"momentum", c.momentum},
          {"drift_day20", c.drift_day20},
          {"drift_day60", c.drift_day60},
          {"noise_document_share", c.noise_document_share},
          {"biotech_share", c.biotech_share}};
}

SynthConfig config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.n_issuers = j.at("n_issuers").get<std::size_t>();
  c.n_events = j.at("n_events").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.start = Date::parse(j.at("start").get<std::string>());
  c.end = Date::parse(j.at("end").get<std::string>());
  const auto& p = j.at("planted");
  c.planted.w_52w_high = p.at("w_52w_high").get<double>();
  c.planted.w_price_dev = p.at("w_price_dev").get<double>();
  c.planted.w_interaction = p.value("w_interaction", 0.0);
  c.planted.base_rate = p.at("base_rate").get<double>();
  c.planted.noise_sd = p.at("noise_sd").get<double>();
  c.bucket_effect = j.at("bucket_effect").get<std::vector<double>>();
  c.bucket_weights = j.at("bucket_weights").get<std::vector<double>>();
  c.momentum = j.at("momentum").get<bool>();
  c.drift_day20 = j.at("drift_day20").get<double>();
  c.drift_day60 = j.at("drift_day60").get<double>();
  c.noise_document_share = j.at("noise_document_share").get<double>();
  c.biotech_share = j.at("biotech_share").get<double>();
  return c;
}

}  // namespace

void SynthConfig::validate() const {
  const strata::BucketSpec spec;
  if (n_events < 1) throw Error(ErrorCode::config, "n_events must be >= 1");
  if (!(planted.base_rate > 0 && planted.base_rate < 1)) throw Error(ErrorCode::config, "base_rate must lie in (0, 1)");
  if (!(planted.noise_sd >= 0)) throw Error(ErrorCode::config, "noise_sd must be >= 0");
  if (bucket_effect.size() != spec.size() || bucket_weights.size() != spec.size())
    throw Error(ErrorCode::config, "bucket_effect and bucket_weights need " + std::to_string(spec.size()) + " entries");
  for (double m : bucket_effect)
    if (!(m > -0.5 && m < 0.09)) throw Error(ErrorCode::config, "bucket_effect entries must lie in (-0.5, 0.09)");
  double wsum = 0.0;
  for (double w : bucket_weights) {
    if (!(w >= 0)) throw Error(ErrorCode::config, "bucket_weights must be non-negative");
    wsum += w;
  }
  if (!(wsum > 0)) throw Error(ErrorCode::config, "bucket_weights must not all be zero");
  if (!(start < end)) throw Error(ErrorCode::config, "synthetic date range is empty");
  if (start < Date(2018, 1, 1)) throw Error(ErrorCode::config, "start must leave a year of price history after 2017-01-02");
  if (!(noise_document_share >= 0 && noise_document_share < 1))
    throw Error(ErrorCode::config, "noise_document_share must lie in [0, 1)");
  if (!(biotech_share >= 0 && biotech_share <= 1)) throw Error(ErrorCode::config, "biotech_share must lie in [0, 1]");
  if (!(drift_day20 > 0 && drift_day60 > -2 && drift_day60 < 2)) throw Error(ErrorCode::config, "drift shape out of range");
}

SynthConfig load_config(const std::filesystem::path& path) {
  const auto ini = config::Ini::load(path);
  ini.require_known("synth", {"n_issuers", "n_events", "seed", "start", "end", "w_52w_high", "w_price_dev", "w_interaction", "base_rate",
                              "noise_sd", "bucket_effect", "bucket_weights", "momentum", "drift_day20", "drift_day60",
                              "noise_document_share", "biotech_share"});
  SynthConfig c;
  const std::string s = "synth";
  c.n_issuers = static_cast<std::size_t>(ini.integer(s, "n_issuers", 0));
  c.n_events = static_cast<std::size_t>(ini.integer(s, "n_events", static_cast<long long>(c.n_events)));
  c.seed = static_cast<std::uint64_t>(ini.integer(s, "seed", static_cast<long long>(c.seed)));
  c.start = ini.date(s, "start", c.start);
  c.end = ini.date(s, "end", c.end);
  c.planted.w_52w_high = ini.number(s, "w_52w_high", c.planted.w_52w_high);
  c.planted.w_price_dev = ini.number(s, "w_price_dev", c.planted.w_price_dev);
  c.planted.w_interaction = ini.number(s, "w_interaction", c.planted.w_interaction);
  c.planted.base_rate = ini.number(s, "base_rate", c.planted.base_rate);
  c.planted.noise_sd = ini.number(s, "noise_sd", c.planted.noise_sd);
  c.bucket_effect = ini.numbers(s, "bucket_effect", c.bucket_effect);
  c.bucket_weights = ini.numbers(s, "bucket_weights", c.bucket_weights);
  c.momentum = ini.flag(s, "momentum", c.momentum);
  c.drift_day20 = ini.number(s, "drift_day20", c.drift_day20);
  c.drift_day60 = ini.number(s, "drift_day60", c.drift_day60);
  c.noise_document_share = ini.number(s, "noise_document_share", c.noise_document_share);
  c.biotech_share = ini.number(s, "biotech_share", c.biotech_share);
  c.validate();
  return c;
}

GroundTruth generate(const SynthConfig& cfg, const std::filesystem::path& out) {
  cfg.validate();
  const strata::BucketSpec buckets;
  GroundTruth truth;
  truth.config = cfg;

  // Calendar runs from 2017 to well past the last disclosure so every outcome window is covered.
  const auto days = trading_days(Date(2017, 1, 2), cfg.end + 160);
  const std::size_t T = days.size();
  truth.bars_start = days.front();
  truth.bars_end = days.back();
  const auto lo_it = std::lower_bound(days.begin(), days.end(), cfg.start);
  const auto lo = static_cast<std::size_t>(lo_it - days.begin());
  const auto hi = static_cast<std::size_t>(std::upper_bound(days.begin(), days.end(), cfg.end) - days.begin()) - 1;
  if (lo < kEstimation + 1) throw Error(ErrorCode::config, "start leaves too little estimation history");
  // Transaction indices lie in [lo, hi - kMaxLag] so disclosures stay inside the range.
  const std::size_t span = hi - kMaxLag - lo + 1;

  const std::size_t n_issuers =
      cfg.n_issuers > 0 ? cfg.n_issuers : std::max<std::size_t>(1, (cfg.n_events + 21) / 22);
  const std::size_t per = cfg.n_events / n_issuers, extra = cfg.n_events % n_issuers;
  if ((per + (extra > 0 ? 1 : 0)) * kSlot > span + kSlot - kMaxLag - 1)
    throw Error(ErrorCode::config, std::to_string(cfg.n_events) + " events do not fit " + std::to_string(n_issuers) +
                                       " issuers over " + cfg.start.iso() + ".." + cfg.end.iso());
  truth.n_issuers = n_issuers;

  // Factor and regime series.
  std::vector<market::FactorReturns> factors(T);
  {
    auto rng = Rng::derive(cfg.seed, 0);
    for (std::size_t t = 0; t < T; ++t)
      factors[t] = {days[t], rng.normal(0.0003, 0.01), rng.normal(0.0, 0.005), rng.normal(0.0, 0.005), 0.00008};
  }
  std::string regime_csv = "date,value\n";
  {
    auto rng = Rng::derive(cfg.seed, 1);
    double v = 18.0;
    for (std::size_t t = 0; t < T; ++t) {
      v = std::max(9.0, v + 0.05 * (18.0 - v) + 1.2 * rng.normal());
      regime_csv += days[t].iso() + ',' + text::fixed(v, 2) + '\n';
    }
  }

  const auto fdir = out / "filings";
  std::filesystem::create_directories(fdir);
  std::string bars_csv = "ticker,date,close,adj_close,volume,shares_outstanding\n";
  std::string map_csv = "cusip,permanent_id,ticker,effective_from,effective_to\n";
  std::string sector_csv = "issuer_id,is_biotech\n";
  std::size_t doc_counter = 0;
  auto write_doc = [&](std::vector<filings::InsiderTransaction> rows) {
    text::write_file(fdir / (rows.front().accession_id + ".xml"), filings::write_form4(rows));
    ++truth.n_documents;
  };
  auto accession = [&](std::size_t issuer, Date d) {
    return padded(1000000 + issuer, 10) + "-" + padded(static_cast<unsigned>(d.year() % 100), 2) + "-" +
           padded(++doc_counter, 6);
  };

  RunningNormalScore score_52w, score_dev;
  double intercept = std::log(cfg.planted.base_rate / (1.0 - cfg.planted.base_rate));
  double mean_effect = 0.0;
  for (double m : cfg.bucket_effect) mean_effect += m;
  mean_effect /= static_cast<double>(cfg.bucket_effect.size());
  std::vector<double> cum_w(cfg.bucket_weights.size());
  std::partial_sum(cfg.bucket_weights.begin(), cfg.bucket_weights.end(), cum_w.begin());

  for (std::size_t i = 0; i < n_issuers; ++i) {
    auto rng = Rng::derive(cfg.seed, 1000 + i);
    const std::string cik = padded(1000000 + i, 10);
    const std::string ticker = ticker_for(i);
    const std::string cusip = padded(100000 + i, 6) + "10" + std::to_string(i % 10);
    const bool biotech = rng.bernoulli(cfg.biotech_share);
    map_csv += cusip + ',' + cik + ',' + ticker + ',' + days.front().iso() + ',' + days.back().iso() + '\n';
    sector_csv += cik + ',' + (biotech ? "1" : "0") + '\n';

    const double alpha = rng.normal(0.0, 0.0002);
    const double b_mkt = rng.uniform(0.6, 1.4), b_smb = rng.uniform(0.0, 1.0), b_hml = rng.normal(0.0, 0.3);
    const double sigma = rng.uniform(0.015, 0.035);
    const double dollar_volume = std::exp(rng.uniform(std::log(5e5), std::log(2.5e6)));
    std::vector<std::string> insiders, titles;
    for (int k = 0; k < 4; ++k) {
      insiders.push_back(padded(5000000 + i * 10 + static_cast<std::size_t>(k), 10));
      titles.emplace_back(kTitles[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(kTitles.size()) - 1))]);
    }

    // Event slots: m events of kSlot days each, separated by random gaps.
    const std::size_t m = per + (i < extra ? 1 : 0);
    std::vector<std::size_t> tx_idx;
    {
      const std::size_t free = span + kSlot - kMaxLag - 1 - m * kSlot;
      std::vector<double> u(m + 1);
      for (auto& v : u) v = rng.exponential(1.0);
      const double total = std::accumulate(u.begin(), u.end(), 0.0);
      std::size_t at = lo;
      for (std::size_t k = 0; k < m; ++k) {
        at += static_cast<std::size_t>(std::floor(u[k] / total * static_cast<double>(free)));
        tx_idx.push_back(at);
        at += kSlot;
      }
    }

    std::vector<double> adj(T);
    adj[0] = std::exp(rng.uniform(std::log(4.0), std::log(40.0)));
    std::size_t pos = 1;
    auto fill_to = [&](std::size_t last) {
      for (; pos <= last && pos < T; ++pos) {
        const auto& f = factors[pos];
        const double r = f.rf + alpha + b_mkt * f.mkt_rf + b_smb * f.smb + b_hml * f.hml + sigma * rng.normal();
        adj[pos] = adj[pos - 1] * (1.0 + std::max(r, -0.5));
      }
    };

    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t tx = tx_idx[k];
      fill_to(tx);
      const auto lag = static_cast<std::size_t>(rng.integer(1, kMaxLag));
      const std::size_t d = tx + lag;
      const double price_tx = round_cents(adj[tx] * (1.0 + rng.uniform(-0.01, 0.01)));
      const double value_target = std::max(5500.0, 27000.0 * std::exp(0.9 * rng.normal()));
      double shares = std::max(1.0, std::round(value_target / price_tx));
      if (shares * price_tx < 5500.0) shares = std::ceil(5500.0 / price_tx);
      // Same expression the event aggregator evaluates.
      const double price_eff = shares * price_tx / shares;

      // Price deviation: pick a bucket, then walk from the transaction close to the target disclosure close.
      const double pick = rng.uniform() * cum_w.back();
      const auto target_bucket = static_cast<std::size_t>(std::upper_bound(cum_w.begin(), cum_w.end(), pick) - cum_w.begin());
      double dev_target = 0.0;
      switch (std::min<std::size_t>(target_bucket, 4)) {
        case 0: dev_target = -rng.exponential(0.05); break;
        case 1: dev_target = rng.uniform(0.002, 0.028); break;
        case 2: dev_target = rng.uniform(0.032, 0.048); break;
        case 3: dev_target = rng.uniform(0.055, 0.095); break;
        default: dev_target = 0.105 + rng.exponential(0.05); break;
      }
      const double close_d = price_eff * (1.0 + dev_target);
      {
        const double total_log = std::log(close_d / adj[tx]);
        std::vector<double> w(lag + 1, 0.0);
        for (std::size_t j = 1; j <= lag; ++j) w[j] = w[j - 1] + 0.5 * sigma * rng.normal();
        for (std::size_t j = 1; j < lag; ++j) {
          const double frac = static_cast<double>(j) / static_cast<double>(lag);
          adj[tx + j] = adj[tx] * std::exp(total_log * frac + w[j] - frac * w[lag]);
        }
        adj[d] = close_d;
      }
      pos = d + 1;
      const double dev = adj[d] / price_eff - 1.0;
      const std::size_t bucket = buckets.bucket_of(dev);
      double high = 0.0;
      for (std::size_t t = d + 1 - kEstimation; t <= d; ++t) high = std::max(high, adj[t]);
      const double pct_high = adj[d] / high - 1.0;

      // Intended probability from standardized disclosure-time features.
      const double z52 = score_52w.score(pct_high);
      const double zdev = score_dev.score(dev);
      const double logit = intercept + cfg.planted.w_52w_high * z52 + cfg.planted.w_price_dev * zdev +
                           cfg.planted.w_interaction * z52 * zdev + cfg.planted.noise_sd * rng.normal();
      const double p = std::clamp(sigmoid(logit), 0.03, 0.65);
      intercept += 0.05 * (cfg.planted.base_rate - p);
      const bool label = rng.uniform() < p;

      // CAR over 30 days conditional on the label, with the bucket mean held at its target.
      const double target = cfg.momentum ? cfg.bucket_effect[bucket] : mean_effect;
      const double up = 0.04 * (1.0 - p) / (1.0 - cfg.planted.base_rate);
      const double down = (p * (0.101 + up) + (1.0 - p) * 0.0995 - target) / (1.0 - p);
      const double car30 = label ? 0.101 + gamma_draw(rng, 2, up) : 0.0995 - gamma_draw(rng, 4, down);

      // Loadings exactly as the labeler will estimate them from the stored prices.
      std::vector<std::array<double, 4>> x;
      std::vector<double> y;
      for (std::size_t t = d + 1 - kEstimation; t <= d; ++t) {
        x.push_back({1.0, factors[t].mkt_rf, factors[t].smb, factors[t].hml});
        y.push_back(adj[t] / adj[t - 1] - 1.0 - factors[t].rf);
      }
      const auto coef = ols4(x, y);

      auto shape = [&](int day) {
        if (day <= 20) return cfg.drift_day20 * day / 20.0;
        if (day <= 30) return cfg.drift_day20 + (1.0 - cfg.drift_day20) * (day - 20) / 10.0;
        return 1.0 + (cfg.drift_day60 - 1.0) * (day - 30) / 30.0;
      };
      std::vector<double> walk(kWindow + 1, 0.0);
      for (int j = 1; j <= kWindow; ++j) walk[static_cast<std::size_t>(j)] = walk[static_cast<std::size_t>(j) - 1] + sigma * rng.normal();
      auto noise = [&](int day) {
        if (day <= 30) return walk[static_cast<std::size_t>(day)] - day / 30.0 * walk[30];
        return walk[static_cast<std::size_t>(day)] - walk[30];
      };
      double prev_cum = 0.0;
      TruthEvent te;
      double realized = 0.0;
      for (int j = 1; j <= kWindow; ++j) {
        const double cum = car30 * shape(j) + noise(j);
        const double ar = cum - prev_cum;
        prev_cum = cum;
        const std::size_t t = d + static_cast<std::size_t>(j);
        const auto& f = factors[t];
        const double r = ar + coef[0] + coef[1] * f.mkt_rf + coef[2] * f.smb + coef[3] * f.hml;
        adj[t] = adj[t - 1] * (1.0 + std::max(r, -0.9));
        realized += adj[t] / adj[t - 1] - 1.0 - coef[0] - coef[1] * f.mkt_rf - coef[2] * f.smb - coef[3] * f.hml;
        if (j == 20) te.car_20 = realized;
        if (j == 30) te.car_30 = realized;
        if (j == 60) te.car_60 = realized;
      }
      pos = d + kWindow + 1;

      const std::size_t who = static_cast<std::size_t>(rng.integer(0, 3));
      filings::InsiderTransaction tx_rec;
      tx_rec.accession_id = accession(i, days[d]);
      tx_rec.issuer_id = cik;
      tx_rec.cusip = cusip;
      tx_rec.ticker = ticker;
      tx_rec.insider_id = insiders[who];
      tx_rec.insider_title_raw = titles[who];
      tx_rec.transaction_date = days[tx];
      tx_rec.disclosure_date = days[d];
      tx_rec.transaction_code = 'P';
      tx_rec.shares = shares;
      tx_rec.price_per_share = price_tx;
      tx_rec.transaction_value = shares * price_tx;
      std::vector<filings::InsiderTransaction> rows{tx_rec};
      if (rng.bernoulli(0.1)) {
        auto withheld = tx_rec;
        withheld.transaction_code = 'F';
        withheld.shares = std::round(shares * 0.2) + 1.0;
        withheld.transaction_value = withheld.shares * price_tx;
        rows.push_back(withheld);
      }
      write_doc(rows);

      te.event_key = eventstudy::EventKey{cik, insiders[who], days[d]}.str();
      te.ticker = ticker;
      te.bucket = bucket;
      te.price_deviation = dev;
      te.pct_from_52w_high = pct_high;
      te.z_52w_high = z52;
      te.z_price_dev = zdev;
      te.intended_p = p;
      te.label = te.car_30 > 0.10 ? 1 : 0;
      truth.events.push_back(te);
    }
    fill_to(T - 1);

    // Filings that the filter chain must reject: sales, sub-threshold purchases, late reports.
    std::size_t n_noise = 0;
    if (cfg.noise_document_share > 0) {
      const double want = static_cast<double>(m) * cfg.noise_document_share / (1.0 - cfg.noise_document_share);
      n_noise = static_cast<std::size_t>(want) + (rng.uniform() < want - std::floor(want) ? 1 : 0);
    }
    for (std::size_t k = 0; k < n_noise; ++k) {
      const auto t = static_cast<std::size_t>(rng.integer(kEstimation + 10, static_cast<std::int64_t>(T) - 10));
      const std::size_t who = static_cast<std::size_t>(rng.integer(0, 3));
      const double kind = rng.uniform();
      filings::InsiderTransaction r;
      r.issuer_id = cik;
      r.cusip = cusip;
      r.ticker = ticker;
      r.insider_id = insiders[who];
      r.insider_title_raw = titles[who];
      r.transaction_date = days[t];
      r.price_per_share = round_cents(adj[t]);
      if (kind < 0.5) {
        r.transaction_code = 'S';
        r.shares = std::max(1.0, std::round(30000.0 * std::exp(0.7 * rng.normal()) / r.price_per_share));
        r.disclosure_date = days[t + static_cast<std::size_t>(rng.integer(1, 3))];
      } else if (kind < 0.85) {
        r.transaction_code = 'P';
        r.shares = std::max(1.0, std::floor(rng.uniform(300.0, 4900.0) / r.price_per_share));
        if (r.shares * r.price_per_share >= 5000.0) continue;
        r.disclosure_date = days[t + static_cast<std::size_t>(rng.integer(1, 3))];
      } else {
        r.transaction_code = 'P';
        r.shares = std::max(1.0, std::round(20000.0 / r.price_per_share));
        r.disclosure_date = days[t] + static_cast<int>(rng.integer(95, 140));
      }
      r.transaction_value = r.shares * r.price_per_share;
      r.accession_id = accession(i, r.disclosure_date);
      write_doc({r});
      ++truth.n_noise_documents;
    }

    // Shares outstanding keep the market cap inside the microcap band; volume tracks a dollar target.
    double shares_out = std::round(std::exp(rng.uniform(std::log(8e7), std::log(3e8))) / adj[0]);
    for (std::size_t t = 0; t < T; ++t) {
      const double cap = adj[t] * shares_out;
      if (cap < kCapLo || cap > kCapHi)
        shares_out = std::round(std::exp(rng.uniform(std::log(8e7), std::log(3e8))) / adj[t]);
      const double volume = std::max(100.0, std::round(dollar_volume * std::exp(0.35 * rng.normal() - 0.06) / adj[t]));
      const auto px = text::fmt(adj[t]);
      bars_csv += ticker + ',' + days[t].iso() + ',' + px + ',' + px + ',' + std::to_string(static_cast<std::int64_t>(volume)) + ',' +
                  text::fmt(shares_out) + '\n';
    }
  }

  text::write_file(out / "bars.csv", bars_csv);
  market::write_factors(out / "factors.csv", factors);
  text::write_file(out / "regime.csv", regime_csv);
  text::write_file(out / "cusip_map.csv", map_csv);
  text::write_file(out / "sectors.csv", sector_csv);

  std::sort(truth.events.begin(), truth.events.end(), [](const TruthEvent& a, const TruthEvent& b) {
    return eventstudy::EventKey::parse(a.event_key) < eventstudy::EventKey::parse(b.event_key);
  });
  std::string jl;
  for (const auto& e : truth.events)
    jl += nlohmann::json{{"event_key", e.event_key},
                         {"ticker", e.ticker},
                         {"bucket", e.bucket},
                         {"price_deviation", e.price_deviation},
                         {"pct_from_52w_high", e.pct_from_52w_high},
                         {"z_52w_high", e.z_52w_high},
                         {"z_price_dev", e.z_price_dev},
                         {"intended_p", e.intended_p},
                         {"label", e.label},
                         {"car_20", e.car_20},
                         {"car_30", e.car_30},
                         {"car_60", e.car_60}}
              .dump() +
          '\n';
  text::write_file(out / "truth.jsonl", jl);
  text::write_file(out / "truth_summary.json", describe(truth).dump(2) + '\n');
  text::write_file(out / "pipeline.ini",
                   "[paths]\nfilings = filings\ncusip_map = cusip_map.csv\nbars = bars.csv\nfactors = factors.csv\n"
                   "sectors = sectors.csv\nregime = regime.csv\noutput = run\n\n[run]\nseed = " +
                       std::to_string(cfg.seed) + "\n");
  return truth;
}

nlohmann::json describe(const GroundTruth& truth) {
  using nlohmann::json;
  const auto& c = truth.config;
  const std::size_t nb = c.bucket_effect.size();
  std::vector<std::size_t> count(nb, 0);
  std::array<std::vector<double>, 3> sums{std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0),
                                          std::vector<double>(nb, 0.0)};
  double label_sum = 0.0, p_sum = 0.0;
  for (const auto& e : truth.events) {
    const auto b = std::min(e.bucket, nb - 1);
    ++count[b];
    sums[0][b] += e.car_20;
    sums[1][b] += e.car_30;
    sums[2][b] += e.car_60;
    label_sum += e.label;
    p_sum += e.intended_p;
  }
  const auto n = static_cast<double>(truth.events.size());
  json horizon_means = json::object(), spreads = json::object();
  json diffs = json::array();
  double max_diff = 0.0;
  const std::array<int, 3> horizons{20, 30, 60};
  for (std::size_t h = 0; h < 3; ++h) {
    json means = json::array();
    for (std::size_t b = 0; b < nb; ++b) {
      if (count[b] == 0) {
        means.push_back(nullptr);
        continue;
      }
      means.push_back(sums[h][b] / static_cast<double>(count[b]));
    }
    if (count.front() > 0 && count.back() > 0)
      spreads[std::to_string(horizons[h])] = means.back().get<double>() - means.front().get<double>();
    horizon_means[std::to_string(horizons[h])] = means;
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (count[b] == 0) {
      diffs.push_back(nullptr);
      continue;
    }
    const double target = c.momentum ? c.bucket_effect[b] : std::accumulate(c.bucket_effect.begin(), c.bucket_effect.end(), 0.0) / static_cast<double>(nb);
    const double d = std::fabs(sums[1][b] / static_cast<double>(count[b]) - target);
    diffs.push_back(d);
    max_diff = std::max(max_diff, d);
  }
  const double rate = n > 0 ? label_sum / n : 0.0;
  return {{"config", config_json(c)},
          {"n_issuers", truth.n_issuers},
          {"n_events", truth.events.size()},
          {"n_documents", truth.n_documents},
          {"n_noise_documents", truth.n_noise_documents},
          {"seed", c.seed},
          {"date_range", {c.start.iso(), c.end.iso()}},
          {"bars_range", {truth.bars_start.iso(), truth.bars_end.iso()}},
          {"planted",
           {{"w_52w_high", c.planted.w_52w_high},
            {"w_price_dev", c.planted.w_price_dev},
            {"w_interaction", c.planted.w_interaction},
            {"base_rate", c.planted.base_rate},
            {"noise_sd", c.planted.noise_sd}}},
          {"bucket_effect", c.bucket_effect},
          {"realized",
           {{"label_rate", rate},
            {"label_rate_se", n > 0 ? std::sqrt(rate * (1.0 - rate) / n) : 0.0},
            {"mean_intended_p", n > 0 ? p_sum / n : 0.0},
            {"bucket_counts", count},
            {"bucket_mean_car", horizon_means},
            {"bucket_abs_diff", diffs},
            {"max_abs_bucket_diff", max_diff},
            {"bucket_spread", spreads}}}};
}

GroundTruth read_truth(const std::filesystem::path& dir) {
  GroundTruth t;
  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(text::read_file(dir / "truth_summary.json"));
    t.config = config_from_json(summary.at("config"));
    t.n_issuers = summary.at("n_issuers").get<std::size_t>();
    t.n_documents = summary.at("n_documents").get<std::size_t>();
    t.n_noise_documents = summary.at("n_noise_documents").get<std::size_t>();
    t.bars_start = Date::parse(summary.at("bars_range").at(0).get<std::string>());
    t.bars_end = Date::parse(summary.at("bars_range").at(1).get<std::string>());
    const auto body = text::read_file(dir / "truth.jsonl");
    for (auto line : text::split(body, '\n')) {
      if (text::trim(line).empty()) continue;
      const auto j = nlohmann::json::parse(line);
      TruthEvent e;
      e.event_key = j.at("event_key").get<std::string>();
      e.ticker = j.at("ticker").get<std::string>();
      e.bucket = j.at("bucket").get<std::size_t>();
      e.price_deviation = j.at("price_deviation").get<double>();
      e.pct_from_52w_high = j.at("pct_from_52w_high").get<double>();
      e.z_52w_high = j.at("z_52w_high").get<double>();
      e.z_price_dev = j.at("z_price_dev").get<double>();
      e.intended_p = j.at("intended_p").get<double>();
      e.label = j.at("label").get<int>();
      e.car_20 = j.at("car_20").get<double>();
      e.car_30 = j.at("car_30").get<double>();
      e.car_60 = j.at("car_60").get<double>();
      t.events.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format, dir.string() + ": malformed ground truth: " + e.what());
  }
  return t;
}

}  // namespace insider::synth
