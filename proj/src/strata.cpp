#include "insider/strata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <set>

#include "insider/error.hpp"
#include "insider/text.hpp"

namespace insider::strata {

void BucketSpec::validate() const {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!std::isfinite(edges[i])) throw Error(ErrorCode::config, "bucket edges must be finite");
    if (i > 0 && !(edges[i - 1] < edges[i])) throw Error(ErrorCode::config, "bucket edges must be strictly increasing");
  }
}

std::size_t BucketSpec::bucket_of(double x) const {
  // Number of edges strictly below x: x equal to an edge falls in the bucket closed at that edge.
  return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), x) - edges.begin());
}

namespace {
std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", v * 100.0);
  return buf;
}
}  // namespace

std::string BucketSpec::label(std::size_t b) const {
  if (edges.empty()) return "all";
  if (b == 0) return "≤ " + pct(edges.front());
  if (b >= edges.size()) return "> " + pct(edges.back());
  return pct(edges[b - 1]) + "–" + pct(edges[b]);
}

namespace {

BucketStats summarize(std::string label, std::vector<double> cars, const std::vector<int>& labels,
                      const std::set<std::string>& tickers) {
  BucketStats s;
  s.label = std::move(label);
  s.n = cars.size();
  s.n_tickers = tickers.size();
  if (cars.empty()) return s;
  std::sort(cars.begin(), cars.end());
  s.mean_car = stats::mean(cars);
  if (cars.size() >= 2) s.ci95_half_width = 1.96 * stats::sample_sd(cars) / std::sqrt(static_cast<double>(cars.size()));
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1;
  s.prob_outperform = static_cast<double>(pos) / static_cast<double>(cars.size());
  s.median_car = stats::quantile_sorted(cars, 0.5);
  auto w = stats::winsorize(cars);
  s.winsorized_mean_car = stats::mean(w);
  return s;
}

struct Grouped {
  std::vector<std::vector<double>> cars;
  std::vector<std::vector<int>> labels;
  std::vector<std::set<std::string>> tickers;
};

Grouped group(std::span<const StrataEvent> events, const BucketSpec& spec) {
  spec.validate();
  Grouped g;
  g.cars.resize(spec.size());
  g.labels.resize(spec.size());
  g.tickers.resize(spec.size());
  for (const auto& e : events) {
    if (!std::isfinite(e.price_deviation) || !std::isfinite(e.car))
      throw Error(ErrorCode::validation, "non-finite price deviation or CAR for issuer " + e.issuer_id);
    const auto b = spec.bucket_of(e.price_deviation);
    g.cars[b].push_back(e.car);
    g.labels[b].push_back(e.label);
    g.tickers[b].insert(e.issuer_id);
  }
  return g;
}

}  // namespace

std::vector<BucketStats> bucketize(std::span<const StrataEvent> events, const BucketSpec& spec) {
  auto g = group(events, spec);
  std::vector<BucketStats> out;
  for (std::size_t b = 0; b < spec.size(); ++b)
    out.push_back(summarize(spec.label(b), std::move(g.cars[b]), g.labels[b], g.tickers[b]));
  return out;
}

StrataTable make_table(std::span<const StrataEvent> events, const BucketSpec& spec, int horizon,
                       std::string partition) {
  StrataTable t;
  t.horizon = horizon;
  t.partition = std::move(partition);
  t.n_events = events.size();
  auto g = group(events, spec);
  auto lo = g.cars.front(), hi = g.cars.back();
  std::sort(lo.begin(), lo.end());
  std::sort(hi.begin(), hi.end());
  try {
    t.extreme_test = stats::welch_t(lo, hi);
  } catch (const Error& e) {
    t.extreme_test_note = e.what();
  }
  for (std::size_t b = 0; b < spec.size(); ++b)
    t.buckets.push_back(summarize(spec.label(b), std::move(g.cars[b]), g.labels[b], g.tickers[b]));
  return t;
}

RegimeSeries load_regime(const std::filesystem::path& path) {
  text::CsvReader csv(path, {"date", "value"});
  RegimeSeries out;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    const auto where = path.string() + ":" + std::to_string(csv.line());
    const Date d = Date::parse(text::trim(f[0]));
    if (!out.emplace(d, text::to_double(f[1], where + " value")).second)
      throw Error(ErrorCode::duplicate_key, where + ": duplicate date " + d.iso());
  }
  return out;
}

namespace {

std::vector<eventstudy::LabeledEvent> relabel(std::span<const eventstudy::Event> events,
                                              const market::MarketView& market, const SweepConfig& cfg, int horizon) {
  auto lc = cfg.label;
  lc.horizon = horizon;
  lc.strict = false;
  return eventstudy::label_events(events, market, lc, cfg.jobs);
}

}  // namespace

SweepReport robustness_sweep(std::span<const eventstudy::Event> events,
                             const std::unordered_map<std::string, double>& price_deviation_by_key,
                             const market::MarketView& market, const SweepConfig& cfg, const RegimeSeries* regime) {
  cfg.buckets.validate();
  if (cfg.horizons.empty()) throw Error(ErrorCode::config, "robustness sweep needs at least one horizon");
  SweepReport report;

  std::vector<eventstudy::Event> usable;
  std::vector<double> deviation;
  for (const auto& e : events) {
    auto it = price_deviation_by_key.find(e.key.str());
    if (it == price_deviation_by_key.end()) {
      report.skipped.push_back({e.key, 0, "no price deviation"});
      continue;
    }
    usable.push_back(e);
    deviation.push_back(it->second);
  }

  auto to_strata = [&](const std::vector<eventstudy::LabeledEvent>& labeled, int horizon,
                       std::vector<std::size_t>* kept_idx) {
    std::vector<StrataEvent> out;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      if (!labeled[i].outcome) {
        report.skipped.push_back({labeled[i].event.key, horizon, labeled[i].skip_reason});
        continue;
      }
      out.push_back({labeled[i].event.key.issuer_id, deviation[i], labeled[i].outcome->car, labeled[i].outcome->label});
      if (kept_idx) kept_idx->push_back(i);
    }
    return out;
  };

  for (int h : cfg.horizons) {
    const auto labeled = relabel(usable, market, cfg, h);
    report.tables.push_back(make_table(to_strata(labeled, h, nullptr), cfg.buckets, h));
  }

  if (regime) {
    const int h = cfg.regime_horizon;
    const auto labeled = relabel(usable, market, cfg, h);
    std::vector<std::size_t> idx;
    std::vector<StrataEvent> all;
    {
      // Skips at this horizon were already reported when it is part of the sweep.
      const auto before = report.skipped.size();
      all = to_strata(labeled, h, &idx);
      if (std::find(cfg.horizons.begin(), cfg.horizons.end(), h) != cfg.horizons.end())
        report.skipped.resize(before);
    }
    std::vector<StrataEvent> low, high;
    for (std::size_t k = 0; k < all.size(); ++k) {
      const Date d = usable[idx[k]].key.disclosure_date;
      auto it = regime->upper_bound(d);
      if (it == regime->begin()) {
        ++report.regime_unmatched;
        continue;
      }
      (std::prev(it)->second <= cfg.regime_threshold ? low : high).push_back(all[k]);
    }
    report.tables.push_back(make_table(low, cfg.buckets, h, "regime_low"));
    report.tables.push_back(make_table(high, cfg.buckets, h, "regime_high"));
  }
  return report;
}

namespace {
std::string opt(const std::optional<double>& v) { return v ? text::fmt(*v) : std::string(); }
}  // namespace

void write_table_csv(const std::filesystem::path& path, const StrataTable& table) {
  std::string out = "price_deviation,n,tickers,mean_car,ci95_half_width,pr_car_gt_threshold\n";
  for (const auto& b : table.buckets)
    out += b.label + ',' + std::to_string(b.n) + ',' + std::to_string(b.n_tickers) + ',' + opt(b.mean_car) + ',' +
           opt(b.ci95_half_width) + ',' + opt(b.prob_outperform) + '\n';
  text::write_file(path, out);
}

void write_detail_csv(const std::filesystem::path& path, const StrataTable& table) {
  std::string out = "price_deviation,n,median_car,winsorized_mean_car\n";
  for (const auto& b : table.buckets)
    out += b.label + ',' + std::to_string(b.n) + ',' + opt(b.median_car) + ',' + opt(b.winsorized_mean_car) + '\n';
  if (table.extreme_test)
    out += "# extreme buckets welch t=" + text::fmt(table.extreme_test->t) + " dof=" + text::fmt(table.extreme_test->dof) +
           " p=" + text::fmt(table.extreme_test->p) + '\n';
  text::write_file(path, out);
}

nlohmann::json to_json(const StrataTable& table) {
  auto o = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : table.buckets)
    buckets.push_back({{"label", b.label},
                       {"n", b.n},
                       {"n_tickers", b.n_tickers},
                       {"mean_car", o(b.mean_car)},
                       {"ci95_half_width", o(b.ci95_half_width)},
                       {"prob_outperform", o(b.prob_outperform)},
                       {"median_car", o(b.median_car)},
                       {"winsorized_mean_car", o(b.winsorized_mean_car)}});
  nlohmann::json j{{"horizon", table.horizon}, {"partition", table.partition}, {"n_events", table.n_events},
                   {"buckets", buckets}};
  if (table.extreme_test)
    j["extreme_test"] = {{"t", table.extreme_test->t}, {"p", table.extreme_test->p}, {"dof", table.extreme_test->dof}};
  else
    j["extreme_test"] = {{"unavailable", table.extreme_test_note}};
  return j;
}

nlohmann::json to_json(const SweepReport& report) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : report.tables) tables.push_back(to_json(t));
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : report.skipped)
    skipped.push_back({{"event_key", s.key.str()}, {"horizon", s.horizon}, {"reason", s.reason}});
  return {{"tables", tables}, {"skipped", skipped}, {"regime_unmatched", report.regime_unmatched}};
}

}  // namespace insider::strata
