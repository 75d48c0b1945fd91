// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <sys/wait.h>

#include "../unit/support.hpp"
#include "insider/error.hpp"
#include "insider/evaluate.hpp"
#include "insider/eventstudy.hpp"
#include "insider/filings.hpp"
#include "insider/learn.hpp"
#include "insider/market_spy.hpp"
#include "insider/pipeline.hpp"
#include "insider/rng.hpp"
#include "insider/stats.hpp"
#include "insider/strata.hpp"
#include "insider/synth.hpp"
#include "insider/text.hpp"

using namespace insider;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

/// Collects failed checks for one criterion.
struct Verdict {
  std::vector<std::string> failures;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok) ++failed;
  }
  std::size_t failed = 0;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << std::fixed << v;
  return o.str();
}

std::string sci(double v) {
  std::ostringstream o;
  o.precision(2);
  o << std::scientific << v;
  return o.str();
}

const fs::path kWork = fs::temp_directory_path() / "insider_acceptance";

// ---- 1 ----------------------------------------------------------------------

Verdict parser_fidelity() {
  Verdict v;
  const auto t0 = Clock::now();
  const fs::path dir = fs::path(INSIDER_FIXTURE_DIR) / "form4";
  std::ifstream in(dir / "expected.jsonl");
  v.check(static_cast<bool>(in), "expected.jsonl missing");
  std::string line;
  int documents = 0, records = 0;
  while (std::getline(in, line)) {
    const auto expected = nlohmann::json::parse(line);
    const auto name = expected.at("document").get<std::string>();
    const auto body = text::read_file(dir / name);
    ++documents;
    if (expected.contains("error")) {
      bool threw = false;
      try {
        (void)filings::parse_form4(body, name);
      } catch (const Error&) {
        threw = true;
      }
      v.check(threw, name + ": expected an error");
      continue;
    }
    std::vector<std::string> warnings;
    const auto got = filings::parse_form4(body, name, &warnings);
    const auto& recs = expected.at("records");
    v.check(got.size() == recs.size(), name + ": record count");
    v.check(warnings.size() == expected.at("warnings").get<std::size_t>(), name + ": warning count");
    for (std::size_t i = 0; i < std::min(got.size(), recs.size()); ++i) {
      v.check(filings::to_json(got[i]) == recs[i], name + ": record " + std::to_string(i));
      ++records;
    }
    v.check(filings::parse_form4(filings::write_form4(got), name) == got, name + ": round trip");
  }
  const double secs = seconds_since(t0);
  v.check(documents >= 5, "fewer than 5 documents");
  v.check(secs < 1.0, "runtime " + fmt(secs) + " s");
  v.detail = std::to_string(documents) + " documents, " + std::to_string(records) + " records, " + fmt(secs, 3) + " s";
  return v;
}

// ---- 2 ----------------------------------------------------------------------

filings::InsiderTransaction purchase(std::string ticker, Date trade, int lag_days, double shares, double price,
                                     char code = 'P') {
  filings::InsiderTransaction tx;
  tx.accession_id = "acc-" + ticker + "-" + trade.iso();
  tx.issuer_id = "ISS-" + ticker;
  tx.ticker = std::move(ticker);
  tx.insider_id = "OWN1";
  tx.insider_title_raw = "Director";
  tx.transaction_date = trade;
  tx.disclosure_date = trade + lag_days;
  tx.transaction_code = code;
  tx.shares = shares;
  tx.price_per_share = price;
  tx.transaction_value = shares * price;
  return tx;
}

Verdict filter_chain() {
  using filings::RejectReason;
  Verdict v;
  const auto days = testing::weekdays_between(Date(2024, 1, 1), Date(2024, 6, 28));
  market::BarTable bars;
  bars["BASE"] = testing::flat_bars(days, 10.0, 50'000, 10e6);
  bars["CAP299"] = testing::flat_bars(days, 10.0, 50'000, 2.99e6);
  bars["CAP30"] = testing::flat_bars(days, 10.0, 50'000, 3e6);
  bars["CAP500"] = testing::flat_bars(days, 10.0, 50'000, 50e6);
  bars["CAP5001"] = testing::flat_bars(days, 10.0, 50'000, 50.01e6);
  bars["ADDV199"] = testing::flat_bars(days, 1.0, 199'999, 100e6);
  bars["ADDV200"] = testing::flat_bars(days, 10.0, 20'000, 10e6);
  bars["CAP299ADDV"] = testing::flat_bars(days, 1.0, 199'999, 29.9e6);
  {
    std::vector<market::DailyBar> sparse;
    for (auto d : days)
      if (d < Date(2024, 3, 8) && d > Date(2024, 3, 1)) sparse.push_back({d, 10.0, 10.0, 50'000, 10e6});
    bars["SPARSE"] = sparse;
  }
  const market::MarketStore store(bars, testing::zero_factors(days));
  const Date t(2024, 3, 7);
  const std::vector<std::pair<filings::InsiderTransaction, std::optional<RejectReason>>> table = {
      {purchase("BASE", t, 2, 1000, 27.0), std::nullopt},
      {purchase("BASE", t, 2, 499.999, 10.0), RejectReason::min_value},
      {purchase("BASE", t, 2, 500, 10.0), std::nullopt},
      {purchase("BASE", t, 90, 1000, 27.0), std::nullopt},
      {purchase("BASE", t, 91, 1000, 27.0), RejectReason::max_lag},
      {purchase("CAP299", t, 2, 1000, 27.0), RejectReason::min_cap},
      {purchase("CAP30", t, 2, 1000, 27.0), std::nullopt},
      {purchase("CAP500", t, 2, 1000, 27.0), std::nullopt},
      {purchase("CAP5001", t, 2, 1000, 27.0), RejectReason::max_cap},
      {purchase("ADDV199", t, 2, 1000, 27.0), RejectReason::min_addv},
      {purchase("ADDV200", t, 2, 1000, 27.0), std::nullopt},
      {purchase("BASE", t, 2, 1000, 27.0, 'S'), RejectReason::not_purchase},
      {purchase("BASE", t, 2, 1000, 27.0, 'A'), RejectReason::not_purchase},
      {purchase("BASE", t, -1, 1000, 27.0), RejectReason::negative_lag},
      {purchase("NOBARS", t, 2, 1000, 27.0), RejectReason::no_market_data},
      {purchase("SPARSE", t, 2, 1000, 27.0), RejectReason::insufficient_volume_history},
      {purchase("BASE", t, 2, 499.999, 10.0, 'S'), RejectReason::not_purchase},
      {purchase("BASE", t, 91, 10, 10.0), RejectReason::max_lag},
      {purchase("CAP299ADDV", t, 2, 1000, 27.0), RejectReason::min_cap},
      {purchase("BASE", t, 0, 1000, 27.0), std::nullopt},
  };
  std::vector<filings::InsiderTransaction> txs;
  for (const auto& r : table) txs.push_back(r.first);
  const auto res = filings::apply_filters(txs, {}, store, 1);
  std::size_t k = 0, r = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& [tx, reason] = table[i];
    const auto row = "row " + std::to_string(i + 1);
    if (!reason) {
      v.check(k < res.kept.size() && res.kept[k] == tx, row + ": expected kept");
      ++k;
    } else {
      v.check(r < res.rejected.size() && res.rejected[r].tx == tx && res.rejected[r].reason == *reason,
              row + ": expected " + filings::to_string(*reason));
      ++r;
    }
  }
  v.check(res.kept.size() == k && res.rejected.size() == r, "partition sizes");
  v.detail = std::to_string(table.size()) + " records, " + std::to_string(res.kept.size()) + " kept, " +
             std::to_string(res.rejected.size()) + " rejected";
  return v;
}

// ---- 3, 4 ------------------------------------------------------------------

std::vector<market::FactorReturns> random_factors(const std::vector<Date>& days, Rng& rng, double rf = 0.0001) {
  std::vector<market::FactorReturns> f;
  for (auto d : days) f.push_back({d, rng.normal(0.0, 0.01), rng.normal(0.0, 0.006), rng.normal(0.0, 0.006), rf});
  return f;
}

std::vector<market::DailyBar> price_path(const std::vector<Date>& days, double start,
                                         const std::function<double(std::size_t)>& ret) {
  std::vector<market::DailyBar> bars;
  double p = start;
  for (std::size_t i = 0; i < days.size(); ++i) {
    if (i > 0) p *= 1.0 + ret(i);
    bars.push_back({days[i], p, p, 100000, 1e7});
  }
  return bars;
}

eventstudy::Event make_event(const std::string& ticker, Date disclosure, const std::string& insider) {
  eventstudy::Event e;
  e.key = {"ISS-" + ticker, insider, disclosure};
  e.ticker = ticker;
  e.transaction_date = disclosure - 1;
  e.shares = 1000;
  e.price_per_share = 10;
  e.transaction_value = 10000;
  return e;
}

Verdict ols_oracle() {
  Verdict v;
  const std::array<double, 4> planted{0.0002, 1.2, 0.5, -0.3};
  auto planted_return = [&](const market::FactorReturns& f) {
    return planted[0] + planted[1] * f.mkt_rf + planted[2] * f.smb + planted[3] * f.hml + f.rf;
  };
  double worst_exact = 0.0, worst_orth = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng = Rng::derive(31, seed);
    const auto days = testing::weekdays(Date(2016, 1, 4), 300);
    const auto f = random_factors(days, rng);
    market::BarTable bars;
    bars["N"] = price_path(days, 35.0, [&](std::size_t i) { return planted_return(f[i]); });
    bars["R"] = price_path(days, 50.0, [&](std::size_t i) { return planted_return(f[i]) + rng.normal(0.0, 0.02); });
    const market::MarketStore m(bars, f);
    const auto l = eventstudy::fit_ff3(m, "N", days.back(), 252, 126);
    const std::array<double, 4> got{l.alpha, l.beta_mkt, l.beta_smb, l.beta_hml};
    for (int j = 0; j < 4; ++j) worst_exact = std::max(worst_exact, std::abs(got[j] - planted[j]));

    const auto n = eventstudy::fit_ff3(m, "R", days.back(), 252, 126);
    Eigen::Vector4d cross = Eigen::Vector4d::Zero();
    for (std::size_t i = days.size() - 252; i < days.size(); ++i) {
      const double y = bars["R"][i].adj_close / bars["R"][i - 1].adj_close - 1.0 - f[i].rf;
      const double e = y - n.alpha - n.beta_mkt * f[i].mkt_rf - n.beta_smb * f[i].smb - n.beta_hml * f[i].hml;
      cross += e * Eigen::Vector4d(1.0, f[i].mkt_rf, f[i].smb, f[i].hml);
    }
    worst_orth = std::max(worst_orth, cross.cwiseAbs().maxCoeff() / 252.0);
  }
  v.check(worst_exact <= 1e-10, "noise-free error " + sci(worst_exact));
  v.check(worst_orth <= 1e-8, "residual orthogonality " + sci(worst_orth));

  int outside = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng = Rng::derive(1000, seed);
    const auto days = testing::weekdays(Date(2015, 1, 1), 260);
    const auto f = random_factors(days, rng);
    market::BarTable bars;
    bars["Z"] = price_path(days, 25.0, [&](std::size_t i) { return planted_return(f[i]) + rng.normal(0.0, 0.02); });
    const market::MarketStore m(bars, f);
    const auto l = eventstudy::fit_ff3(m, "Z", days.back(), 252, 126);
    const std::array<double, 4> got{l.alpha, l.beta_mkt, l.beta_smb, l.beta_hml};
    const std::array<double, 4> se{l.se_alpha, l.se_mkt, l.se_smb, l.se_hml};
    for (int j = 0; j < 4; ++j)
      if (std::abs(got[j] - planted[j]) > 3.0 * se[j]) ++outside;
  }
  v.check(outside == 0, std::to_string(outside) + " of 400 coefficients outside 3 se");
  v.detail = "max noise-free error " + sci(worst_exact) + ", " + std::to_string(outside) +
             "/400 outside 3 se, max orthogonality " + sci(worst_orth);
  return v;
}

Verdict car_oracle() {
  Verdict v;
  Rng rng(99);
  const auto days = testing::weekdays(Date(2012, 1, 2), 700);
  const auto f = random_factors(days, rng);
  market::BarTable bars;
  const int tickers = 20;
  for (int k = 0; k < tickers; ++k) {
    const double a = rng.normal(0.0, 0.001), bm = rng.uniform(0.2, 1.8), bs = rng.normal(0.0, 0.5),
                 bh = rng.normal(0.0, 0.5);
    bars["T" + std::to_string(k)] = price_path(days, rng.uniform(2.0, 90.0), [&](std::size_t i) {
      return a + bm * f[i].mkt_rf + bs * f[i].smb + bh * f[i].hml + f[i].rf + rng.normal(0.0, 0.03);
    });
  }
  const market::MarketStore m(bars, f);
  std::vector<eventstudy::Event> events;
  for (int i = 0; i < 1000; ++i) {
    const auto idx = static_cast<std::size_t>(rng.integer(260, 660));
    events.push_back(make_event("T" + std::to_string(rng.integer(0, tickers - 1)),
                                days[idx] + static_cast<int>(rng.integer(0, 2)), "O" + std::to_string(i)));
  }
  const eventstudy::LabelConfig cfg;
  const auto labeled = eventstudy::label_events(events, m, cfg, 1);
  double worst = 0.0;
  int positives = 0;
  const auto& cal = m.calendar();
  for (const auto& le : labeled) {
    if (!le.outcome) {
      v.check(false, le.event.key.str() + " skipped: " + le.skip_reason);
      continue;
    }
    const auto& o = *le.outcome;
    const auto& l = o.loadings;
    const std::size_t start = *cal.first_after(le.event.key.disclosure_date);
    double car = 0.0;
    for (int h = 0; h < cfg.horizon; ++h) {
      const Date d = cal.at(start + static_cast<std::size_t>(h));
      const double r = m.bar_on(le.event.ticker, d)->adj_close /
                           m.bar_on(le.event.ticker, cal.at(start + static_cast<std::size_t>(h) - 1))->adj_close -
                       1.0;
      const auto* fr = m.factors_on(d);
      car += r - l.alpha - l.beta_mkt * fr->mkt_rf - l.beta_smb * fr->smb - l.beta_hml * fr->hml;
    }
    worst = std::max(worst, std::abs(o.car - car));
    v.check(o.label == (o.car > 0.10 ? 1 : 0), le.event.key.str() + ": label");
    positives += o.label;
  }
  v.check(labeled.size() == 1000, "event count");
  v.check(worst <= 1e-12, "max CAR difference " + sci(worst));

  // Boundary: a CAR equal to the threshold is negative, one ulp above is positive.
  const auto bdays = testing::weekdays(Date(2021, 1, 4), 320);
  market::BarTable b;
  b["L"] = price_path(bdays, 10.0, [&](std::size_t i) { return i > 280 ? 0.1 / 30.0 : 0.0; });
  const market::MarketStore bm(b, testing::zero_factors(bdays));
  const auto ev = make_event("L", bdays[280], "OWN");
  const auto base = eventstudy::label_event(ev, bm, cfg);
  v.check(std::abs(base.car - 0.1) <= 1e-12, "boundary CAR is not 0.100");
  auto at = cfg;
  at.car_threshold = base.car;
  v.check(eventstudy::label_event(ev, bm, at).label == 0, "CAR equal to the threshold labelled positive");
  at.car_threshold = std::nextafter(base.car, 0.0);
  v.check(eventstudy::label_event(ev, bm, at).label == 1, "CAR above the threshold labelled negative");
  v.detail = "1000 events, " + std::to_string(positives) + " positive, max |car - oracle| " + sci(worst);
  return v;
}

// ---- 6, 7 ------------------------------------------------------------------

void random_instance(Rng& rng, std::size_t max_n, std::vector<double>& s, std::vector<int>& y) {
  const auto n = static_cast<std::size_t>(rng.integer(2, static_cast<std::int64_t>(max_n)));
  const auto levels = rng.integer(2, 40);
  s.assign(n, 0.0);
  y.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.bernoulli(0.35) ? 1 : 0;
    const double u = rng.uniform() * 0.6 + 0.4 * y[i];
    s[i] = rng.bernoulli(0.5) ? std::floor(u * static_cast<double>(levels)) / static_cast<double>(levels) : u;
  }
  y[0] = 1;
  y[1] = 0;
}

Verdict auc_oracle() {
  Verdict v;
  Rng rng(2718);
  double worst = 0.0, worst_trap = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    random_instance(rng, 200, s, y);
    double num = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1.0;
          num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    const double a = evaluate::auc(s, y);
    worst = std::max(worst, std::abs(a - num / pairs));
    worst_trap = std::max(worst_trap, std::abs(evaluate::trapezoid_area(evaluate::roc_curve(s, y)) - a));
  }
  v.check(worst <= 1e-12, "brute force difference " + sci(worst));
  v.check(worst_trap <= 1e-12, "trapezoid difference " + sci(worst_trap));
  v.detail = "200 instances, max differences " + sci(worst) + " / " + sci(worst_trap);
  return v;
}

Verdict threshold_oracle() {
  Verdict v;
  Rng rng(17);
  int ties = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 300));
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(rng.integer(0, 100)) / 100.0 : rng.uniform();
      y[i] = rng.bernoulli(0.1 + 0.6 * s[i]) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    // Exhaustive grid, scanned from the top so ties keep the largest tau.
    double best_f1 = -1.0, best_tau = 0.0;
    int at_best = 0;
    for (int i = 99; i >= 1; --i) {
      const double tau = i / 100.0;
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (s[k] >= tau) (y[k] ? tp : fp) += 1;
        else if (y[k]) fn += 1;
      }
      const double f1 = 2 * tp / (2 * tp + fp + fn);
      if (f1 > best_f1) best_f1 = f1, best_tau = tau, at_best = 1;
      else if (f1 == best_f1) ++at_best;
    }
    if (at_best > 1) ++ties;
    v.check(learn::optimize_threshold(s, y) == best_tau, "trial " + std::to_string(trial));
  }
  v.detail = "100 sets, " + std::to_string(ties) + " with tied optima";
  return v;
}

// ---- 11 --------------------------------------------------------------------

Verdict statistical_kernels() {
  Verdict v;
  struct WelchCase {
    std::vector<double> a, b;
    double t, p, dof;
  };
  const std::vector<WelchCase> welch = {
      {{1, 2, 3}, {4, 5, 6}, -3.6742346141747673, 0.021311641128756727, 4.0},
      {{1, 2, 3, 4}, {2, 4, 6, 8, 10}, -2.2514363231593695, 0.06913359319239236, 5.520787746170677},
      {{0.5, 0.7, 0.2, 0.9, 1.1}, {0.1, 0.3, 0.2}, 2.882306768491567, 0.03464377847038688, 4.981605688131495},
      {{10, 12, 9, 11, 13, 8}, {7, 6, 9, 5}, 3.2732683535398857, 0.01354962849648655, 7.023121387283238},
      {{1.2, 3.4, 2.2, 5.1}, {1.1, 1.0, 1.3, 0.9, 1.2, 1.05}, 2.239270729229193, 0.1101843013218047, 3.0290302950102195},
      {{0, 0, 1}, {5, 6, 7, 8}, -8.488382153210786, 0.0007241727391364186, 4.349397590361446},
      {{2.5, 2.7, 2.9, 3.1}, {2.4, 2.8, 3.2, 3.6}, -0.6928203230275499, 0.5231770855723348, 4.4117647058823515},
      {{-1, -2, -3, -10}, {1, 2, 3, 10}, -2.7712812921102037, 0.032367622734296025, 6.0},
      {{100, 101, 99, 100.5}, {98, 97.5, 99.5}, 2.4305037014601587, 0.0740589772487199, 3.8712214011933455},
      {{0.023, 0.1, -0.05, 0.2, 0.01}, {0.063, 0.3, 0.15, -0.02, 0.09, 0.11}, -0.9610034504788787, 0.36189832978524383,
       8.911500758426419},
  };
  double worst = 0.0;
  for (const auto& c : welch) {
    const auto r = stats::welch_t(c.a, c.b);
    worst = std::max({worst, std::abs(r.t - c.t), std::abs(r.p - c.p), std::abs(r.dof - c.dof)});
  }
  struct TQ {
    double q, dof, t;
  };
  const std::vector<TQ> tq = {
      {0.975, 1, 12.706204736432095}, {0.975, 2, 4.302652729696142},  {0.975, 5, 2.570581835636314},
      {0.975, 10, 2.2281388519649385}, {0.975, 30, 2.0422724563012373}, {0.95, 3, 2.3533634348018264},
      {0.995, 4, 4.604094871415897},  {0.99, 20, 2.527977002740546},  {0.9, 7, 1.4149239276488585},
      {0.999, 2.5, 13.822193110834316},
  };
  for (const auto& c : tq) worst = std::max(worst, std::abs(stats::student_t_cdf(c.t, c.dof) - c.q));
  v.check(worst <= 1e-6, "reference difference " + sci(worst));

  Rng rng(5);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(static_cast<std::size_t>(rng.integer(1, 300)));
    for (auto& e : x) e = static_cast<double>(rng.integer(-1000, 1000));
    const double lq = rng.uniform(0.0, 0.2), uq = rng.uniform(0.8, 1.0);
    auto sorted = x;
    std::sort(sorted.begin(), sorted.end());
    auto q = [&](double p) {
      const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
      const auto lo = static_cast<std::size_t>(std::floor(h));
      if (lo + 1 >= sorted.size()) return sorted.back();
      return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
    };
    const double lo = q(lq), hi = q(uq);
    const auto w = stats::winsorize(x, lq, uq);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (w[i] != std::clamp(x[i], lo, hi)) ++mismatches;
  }
  v.check(mismatches == 0, std::to_string(mismatches) + " winsorize mismatches");
  v.detail = "20 reference values, max difference " + sci(worst) + "; 200 winsorize sequences exact";
  return v;
}

// ---- synthetic pipeline runs (5, 8, 9, 10, 12) ------------------------------

struct SynthRun {
  fs::path dir;
  pipeline::RunSummary summary;
  double seconds = 0.0;
};

SynthRun synth_run(const std::string& name, const synth::SynthConfig& sc) {
  SynthRun r;
  r.dir = kWork / name;
  fs::remove_all(r.dir);
  const auto t0 = Clock::now();
  (void)synth::generate(sc, r.dir);
  auto cfg = pipeline::load_config(r.dir / "pipeline.ini");
  r.summary = pipeline::run_all(cfg);
  r.seconds = seconds_since(t0);
  return r;
}

Verdict lookahead_guard(const SynthRun& run) {
  Verdict v;
  v.check(run.summary.lookahead_reads > 0, "no audited reads");
  v.check(run.summary.lookahead_violations == 0, std::to_string(run.summary.lookahead_violations) + " violations");
  v.detail = std::to_string(run.summary.lookahead_violations) + " violations in " +
             std::to_string(run.summary.lookahead_reads) + " scoped reads";
  return v;
}

Verdict nonlinearity(const SynthRun& run) {
  Verdict v;
  Rng rng(2024);
  auto xor_data = [&](std::size_t n) {
    learn::Dataset d;
    d.columns = {"x0", "x1", "x2"};
    for (std::size_t i = 0; i < n; ++i) {
      const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), c = rng.normal();
      d.push(std::vector{a, b, c}, (a > 0) != (b > 0) ? 1 : 0);
    }
    return d;
  };
  const auto train = xor_data(2000), test = xor_data(1000);
  learn::GbmConfig cfg;
  cfg.n_trees = 100;
  cfg.max_depth = 3;
  const double xg = evaluate::auc(learn::predict(learn::train_gbm(train, cfg), test), test.y);
  const double xl = evaluate::auc(learn::predict(learn::train_logistic(train, 1.0), test), test.y);
  v.check(xg >= 0.95, "XOR GBM AUC " + fmt(xg));
  v.check(xl <= 0.60, "XOR logistic AUC " + fmt(xl));

  const double g = run.summary.gbm_test_auc.value_or(0.0), l = run.summary.logistic_test_auc.value_or(1.0);
  v.check(g >= 0.65, "pipeline GBM AUC " + fmt(g));
  v.check(g >= l - 0.01, "pipeline GBM " + fmt(g) + " below logistic " + fmt(l));
  v.check(run.seconds < 120.0, "runtime " + fmt(run.seconds, 1) + " s");
  v.detail = "XOR " + fmt(xg) + " vs " + fmt(xl) + "; synthetic 10k GBM " + fmt(g) + " vs logistic " + fmt(l) + " in " +
             fmt(run.seconds, 1) + " s";
  return v;
}

Verdict importance(const SynthRun& run) {
  Verdict v;
  std::istringstream in(text::read_file(run.dir / "run" / "07_evaluate" / "table3.csv"));
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  std::vector<std::string> cells;
  std::stringstream ss(first);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  const bool ok = cells.size() >= 3;
  v.check(ok, "table3.csv has no ranking");
  if (!ok) return v;
  const double share = std::stod(cells[2]);
  v.check(cells[1] == "pct_from_52w_high", "top feature is " + cells[1]);
  v.check(share >= 0.25, "top share " + fmt(share));
  v.detail = cells[1] + " first with gain share " + fmt(share);
  return v;
}

Verdict stratification(const SynthRun& run, const std::vector<double>& targets) {
  Verdict v;
  const auto sweep = nlohmann::json::parse(text::read_file(run.dir / "run" / "08_stratify" / "sweep.json"));
  const nlohmann::json* table = nullptr;
  for (const auto& t : sweep["tables"])
    if (t["horizon"] == 30 && t["partition"] == "all") table = &t;
  v.check(table != nullptr, "no 30-day table");
  if (!table) return v;
  const auto& buckets = (*table)["buckets"];
  v.check(buckets.size() == targets.size(), "bucket count");
  double worst = 0.0, worst_w = 0.0;
  std::string means;
  for (std::size_t b = 0; b < std::min(buckets.size(), targets.size()); ++b) {
    const auto& bk = buckets[b];
    if (bk["mean_car"].is_null() || bk["winsorized_mean_car"].is_null()) {
      v.check(false, "empty bucket " + std::to_string(b));
      continue;
    }
    const double m = bk["mean_car"].get<double>(), w = bk["winsorized_mean_car"].get<double>();
    worst = std::max(worst, std::abs(m - targets[b]));
    worst_w = std::max(worst_w, std::abs(w - targets[b]));
    means += (b ? " " : "") + fmt(m);
  }
  v.check(worst <= 0.01, "bucket mean off by " + fmt(worst));
  v.check(worst_w <= 0.012, "winsorized mean off by " + fmt(worst_w));
  const auto& xt = (*table)["extreme_test"];
  const bool tested = xt.contains("p");
  v.check(tested, "extreme test unavailable");
  const double p = tested ? xt["p"].get<double>() : 1.0;
  v.check(p < 0.01, "extreme-bucket p " + sci(p));
  v.detail = std::to_string((*table)["n_events"].get<std::size_t>()) + " events, means [" + means + "], max |diff| " +
             fmt(worst) + " (winsorized " + fmt(worst_w) + "), t " + (tested ? fmt(xt["t"].get<double>(), 2) : "n/a") +
             ", p " + sci(p);
  return v;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(INSIDER_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = text::read_file(e.path());
  return out;
}

Verdict determinism(const SynthRun& run) {
  Verdict v;
  const auto ini = (run.dir / "pipeline.ini").string();
  const auto a = kWork / "det_jobs1", b = kWork / "det_jobs4";
  v.check(cli("--jobs 1 run-all --config " + ini + " --output " + a.string()) == 0, "jobs=1 run failed");
  v.check(cli("--jobs 4 run-all --config " + ini + " --output " + b.string()) == 0, "jobs=4 run failed");
  const auto ta = read_tree(a), tb = read_tree(b);
  v.check(!ta.empty() && ta.size() == tb.size(), "file sets differ");
  std::size_t same = 0;
  for (const auto& [name, body] : ta) {
    const auto it = tb.find(name);
    const bool eq = it != tb.end() && it->second == body;
    v.check(eq, name + " differs");
    same += eq ? 1 : 0;
  }
  v.detail = std::to_string(same) + " of " + std::to_string(ta.size()) + " files byte-identical across --jobs 1 and 4";
  return v;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const char* name, const std::function<Verdict()>& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const bool pass = v.failed == 0;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS " : "FAIL ") << n << " " << name;
    if (!v.detail.empty()) std::cout << " (" << v.detail << ")";
    std::cout << "\n";
    for (const auto& f : v.failures) std::cout << "     " << f << "\n";
    std::cout.flush();
  };

  fs::create_directories(kWork);
  report(1, "parser fidelity", parser_fidelity);
  report(2, "filter chain boundaries", filter_chain);
  report(3, "OLS oracle", ols_oracle);
  report(4, "CAR and label oracle", car_oracle);

  std::optional<SynthRun> main_run;
  std::string run_error;
  try {
    main_run = synth_run("synth10k", synth::SynthConfig{});
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  auto with_run = [&](const std::function<Verdict(const SynthRun&)>& fn) {
    return [&, fn] {
      if (!main_run) throw Error(ErrorCode::internal, "synthetic run failed: " + run_error);
      return fn(*main_run);
    };
  };
  report(5, "look-ahead guard", with_run(lookahead_guard));
  report(6, "AUC oracle", auc_oracle);
  report(7, "threshold optimizer", threshold_oracle);
  report(8, "nonlinearity advantage", with_run(nonlinearity));
  report(9, "importance dominance", with_run(importance));
  report(10, "momentum stratification", [] {
    synth::SynthConfig sc;
    sc.n_events = 17000;
    sc.seed = 17;
    const auto run = synth_run("synth17k", sc);
    return stratification(run, sc.bucket_effect);
  });
  report(11, "statistical kernels", statistical_kernels);
  report(12, "determinism", with_run(determinism));

  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
