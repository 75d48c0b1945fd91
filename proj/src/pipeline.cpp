#include "insider/pipeline.hpp"

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_map>

#include "insider/error.hpp"
#include "insider/evaluate.hpp"
#include "insider/hash.hpp"
#include "insider/market_spy.hpp"
#include "insider/parallel.hpp"
#include "insider/text.hpp"

namespace insider::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kStages[] = {"01_parse",    "02_ingest",   "03_label",    "04_features",
                                   "05_train",    "06_threshold", "07_evaluate", "08_stratify"};

void write_json(const fs::path& p, const json& j) { text::write_file(p, j.dump(2) + "\n"); }

bool is_remote(const std::string& s) { return s.rfind("http://", 0) == 0; }

fs::path fresh_dir(const fs::path& d) {
  std::error_code ec;
  fs::remove_all(d, ec);
  fs::create_directories(d, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + d.string() + ": " + ec.message());
  return d;
}

// Re-throws with the stage name in front, keeping the error code.
template <typename Fn>
auto in_stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage ") + name + ": " + e.detail());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::format, std::string("stage ") + name + ": " + e.what());
  }
}

json audit_json(const market::SpyMarket& spy) {
  return {{"reads", spy.reads()}, {"scoped_reads", spy.scoped_reads()}, {"violations", spy.violation_count()}};
}

features::FeatureMatrix rows_between(const features::FeatureMatrix& m, std::optional<Date> after, Date through) {
  features::FeatureMatrix out;
  for (const auto& r : m.rows) {
    const Date d = r.key.disclosure_date;
    if ((!after || d > *after) && d <= through) out.rows.push_back(r);
  }
  return out;
}

std::string opt_fixed(const std::optional<double>& v, int digits) { return v ? text::fixed(*v, digits) : ""; }

std::vector<std::vector<std::string>> read_table(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text::read_file(p));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    for (auto c : text::split(line, ',')) cells.emplace_back(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string markdown_table(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return "_(empty)_\n";
  std::string out = "|";
  for (const auto& h : rows[0]) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < rows[0].size(); ++i) out += " --- |";
  out += "\n";
  for (std::size_t r = 1; r < rows.size(); ++r) {
    out += "|";
    for (const auto& c : rows[r]) out += " " + (c.empty() ? std::string("n/a") : c) + " |";
    out += "\n";
  }
  return out;
}

}  // namespace

// ---- configuration ----

filings::FilterConfig filter_config(const config::Ini& ini) {
  ini.require_known("filters", {"max_lag_days", "min_value", "min_cap", "max_cap", "min_addv", "addv_window_days",
                                "min_addv_days"});
  filings::FilterConfig c;
  c.max_lag_days = static_cast<int>(ini.integer("filters", "max_lag_days", c.max_lag_days));
  c.min_value = ini.number("filters", "min_value", c.min_value);
  c.min_cap = ini.number("filters", "min_cap", c.min_cap);
  c.max_cap = ini.number("filters", "max_cap", c.max_cap);
  c.min_addv = ini.number("filters", "min_addv", c.min_addv);
  c.addv_window_days = static_cast<int>(ini.integer("filters", "addv_window_days", c.addv_window_days));
  c.min_addv_days = static_cast<std::size_t>(
      ini.integer("filters", "min_addv_days", static_cast<long long>(c.min_addv_days)));
  c.strict = ini.flag("run", "strict", false);
  c.validate();
  return c;
}

eventstudy::LabelConfig label_config(const config::Ini& ini) {
  ini.require_known("label", {"horizon", "car_threshold", "estimation_window", "min_obs", "compound"});
  eventstudy::LabelConfig c;
  c.horizon = static_cast<int>(ini.integer("label", "horizon", c.horizon));
  c.car_threshold = ini.number("label", "car_threshold", c.car_threshold);
  c.estimation_window = static_cast<int>(ini.integer("label", "estimation_window", c.estimation_window));
  c.min_obs = static_cast<int>(ini.integer("label", "min_obs", c.min_obs));
  c.compound = ini.flag("label", "compound", c.compound);
  c.strict = ini.flag("run", "strict", false);
  c.validate();
  return c;
}

features::FeatureConfig feature_config(const config::Ini& ini) {
  ini.require_known("features", {"range_window", "range_min_days", "vol_window", "vol_min_returns",
                                 "first_purchase_days", "history_window_days", "addv_window_days", "addv_min_days"});
  features::FeatureConfig c;
  auto size = [&](const char* key, std::size_t fallback) {
    const auto v = ini.integer("features", key, static_cast<long long>(fallback));
    if (v < 0) throw Error(ErrorCode::config, std::string("features.") + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.range_window = static_cast<int>(ini.integer("features", "range_window", c.range_window));
  c.range_min_days = size("range_min_days", c.range_min_days);
  c.vol_window = static_cast<int>(ini.integer("features", "vol_window", c.vol_window));
  c.vol_min_returns = size("vol_min_returns", c.vol_min_returns);
  c.first_purchase_days = static_cast<int>(ini.integer("features", "first_purchase_days", c.first_purchase_days));
  c.history_window_days = static_cast<int>(ini.integer("features", "history_window_days", c.history_window_days));
  c.addv_window_days = static_cast<int>(ini.integer("features", "addv_window_days", c.addv_window_days));
  c.addv_min_days = size("addv_min_days", c.addv_min_days);
  if (c.range_window < 2 || c.vol_window < 2 || c.first_purchase_days < 1 || c.history_window_days < 0 ||
      c.addv_window_days < 1)
    throw Error(ErrorCode::config, "feature windows out of range");
  return c;
}

learn::SplitSpec split_spec(const config::Ini& ini) {
  ini.require_known("split", {"train_end", "valid_end", "test_end"});
  learn::SplitSpec s;
  s.train_end = ini.date("split", "train_end", s.train_end);
  s.valid_end = ini.date("split", "valid_end", s.valid_end);
  s.test_end = ini.date("split", "test_end", s.test_end);
  s.validate();
  return s;
}

std::vector<learn::GbmConfig> gbm_grid(const config::Ini& ini, std::uint64_t seed) {
  ini.require_known("gbm", {"n_trees", "max_depth", "learning_rate", "min_child_weight", "l2_reg", "subsample",
                            "n_bins"});
  const learn::GbmConfig d;
  auto ints = [&](const char* key, std::vector<long long> fallback) { return ini.integers("gbm", key, fallback); };
  auto nums = [&](const char* key, double fallback) { return ini.numbers("gbm", key, {fallback}); };
  const auto trees = ints("n_trees", {100, 200});
  const auto depth = ints("max_depth", {2, 3, 4});
  const auto lr = nums("learning_rate", d.learning_rate);
  const auto mcw = nums("min_child_weight", d.min_child_weight);
  const auto l2 = nums("l2_reg", d.l2_reg);
  const auto sub = nums("subsample", d.subsample);
  const auto bins = ints("n_bins", {d.n_bins});
  std::vector<learn::GbmConfig> grid;
  for (auto t : trees)
    for (auto md : depth)
      for (auto a : lr)
        for (auto m : mcw)
          for (auto l : l2)
            for (auto s : sub)
              for (auto b : bins) {
                learn::GbmConfig c;
                c.n_trees = static_cast<int>(t);
                c.max_depth = static_cast<int>(md);
                c.learning_rate = a;
                c.min_child_weight = m;
                c.l2_reg = l;
                c.subsample = s;
                c.n_bins = static_cast<int>(b);
                c.seed = seed;
                c.validate();
                grid.push_back(c);
              }
  if (grid.empty()) throw Error(ErrorCode::config, "gbm grid is empty");
  return grid;
}

strata::BucketSpec bucket_spec(const config::Ini& ini) {
  strata::BucketSpec b;
  b.edges = ini.numbers("strata", "edges", b.edges);
  b.validate();
  return b;
}

void PipelineConfig::validate() const {
  auto need = [](const fs::path& p, const char* what) {
    if (p.empty()) throw Error(ErrorCode::config, std::string("paths.") + what + " is not set");
    if (!fs::exists(p)) throw Error(ErrorCode::config, std::string("paths.") + what + ": " + p.string() + " does not exist");
  };
  if (paths.filings.empty()) throw Error(ErrorCode::config, "paths.filings is not set");
  if (!is_remote(paths.filings) && !fs::is_directory(paths.filings))
    throw Error(ErrorCode::config, "paths.filings: " + paths.filings + " is not a directory");
  need(paths.cusip_map, "cusip_map");
  need(paths.bars, "bars");
  need(paths.factors, "factors");
  need(paths.sectors, "sectors");
  if (!paths.regime.empty()) need(paths.regime, "regime");
  if (paths.output.empty()) throw Error(ErrorCode::config, "paths.output is not set");
  filters.validate();
  label.validate();
  split.validate();
  buckets.validate();
  if (grid.empty()) throw Error(ErrorCode::config, "gbm grid is empty");
  for (const auto& g : grid) g.validate();
  if (tuning_folds < 2) throw Error(ErrorCode::config, "tuning.folds must be at least 2");
  if (!(logistic_l2 >= 0.0)) throw Error(ErrorCode::config, "logistic.l2 must be non-negative");
  if (horizons.empty()) throw Error(ErrorCode::config, "strata.horizons is empty");
  for (int h : horizons)
    if (h < 1) throw Error(ErrorCode::config, "strata.horizons must be positive");
  if (jobs < 1) throw Error(ErrorCode::config, "run.jobs must be at least 1");
}

PipelineConfig config_from_ini(const config::Ini& ini) {
  ini.require_known("paths", {"filings", "cusip_map", "bars", "factors", "sectors", "regime", "output"});
  ini.require_known("run", {"strict", "jobs", "percent_factors", "seed", "audit"});
  ini.require_known("tuning", {"folds"});
  ini.require_known("logistic", {"l2"});
  ini.require_known("strata", {"horizons", "edges", "regime_threshold"});
  PipelineConfig c;
  const auto filings = ini.str("paths", "filings", "");
  c.paths.filings = filings.empty() || is_remote(filings) ? filings : ini.path("paths", "filings").string();
  c.paths.cusip_map = ini.path("paths", "cusip_map");
  c.paths.bars = ini.path("paths", "bars");
  c.paths.factors = ini.path("paths", "factors");
  c.paths.sectors = ini.path("paths", "sectors");
  c.paths.regime = ini.path("paths", "regime");
  c.paths.output = ini.path("paths", "output");
  if (c.paths.output.empty()) c.paths.output = ini.base_dir() / "run";
  const auto seed = ini.integer("run", "seed", 42);
  if (seed < 0) throw Error(ErrorCode::config, "run.seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.strict = ini.flag("run", "strict", false);
  c.percent_factors = ini.flag("run", "percent_factors", false);
  c.audit_reads = ini.flag("run", "audit", true);
  const auto jobs = ini.integer("run", "jobs", 1);
  if (jobs < 1) throw Error(ErrorCode::config, "run.jobs must be at least 1");
  c.jobs = static_cast<unsigned>(jobs);
  c.filters = filter_config(ini);
  c.label = label_config(ini);
  c.features = feature_config(ini);
  c.split = split_spec(ini);
  c.grid = gbm_grid(ini, c.seed);
  c.tuning_folds = static_cast<int>(ini.integer("tuning", "folds", 3));
  c.logistic_l2 = ini.number("logistic", "l2", 1.0);
  c.horizons.clear();
  for (auto h : ini.integers("strata", "horizons", {20, 30, 60})) c.horizons.push_back(static_cast<int>(h));
  c.regime_threshold = ini.number("strata", "regime_threshold", 20.0);
  c.buckets = bucket_spec(ini);
  return c;
}

PipelineConfig load_config(const fs::path& path) { return config_from_ini(config::Ini::load(path)); }

// ---- stage helpers ----

ParseOutput parse_documents(const std::string& source, bool strict, unsigned jobs, const fs::path& cache_dir) {
  const auto docs = filings::fetch_filing_index(source, cache_dir);
  ParseOutput out;
  out.documents = docs.size();
  struct Slot {
    std::vector<filings::InsiderTransaction> txs;
    std::vector<std::string> warnings;
    std::string error;
    std::string digest;
  };
  std::vector<Slot> slots(docs.size());
  parallel_for(docs.size(), jobs, [&](std::size_t i) {
    const auto body = text::read_file(docs[i].path);
    slots[i].digest = sha256_hex(body);
    try {
      slots[i].txs = filings::parse_form4(body, docs[i].name, &slots[i].warnings);
    } catch (const Error& e) {
      if (strict) throw Error(e.code(), docs[i].name + ": " + e.detail());
      slots[i].error = std::string(to_string(e.code())) + ": " + e.detail();
    }
  });
  std::string manifest;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    manifest += docs[i].name + "  " + slots[i].digest + "\n";
    for (auto& w : slots[i].warnings) out.warnings.push_back(docs[i].name + ": " + w);
    if (!slots[i].error.empty()) out.failed.emplace_back(docs[i].name, slots[i].error);
    for (auto& t : slots[i].txs) out.parsed.push_back(std::move(t));
  }
  out.digest = sha256_hex(manifest);
  return out;
}

std::string digest_path(const fs::path& p) {
  if (!fs::is_directory(p)) return sha256_file(p);
  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto& e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), p).generic_string(), e.path());
  std::sort(files.begin(), files.end());
  std::string list;
  for (const auto& [name, path] : files) list += name + "  " + sha256_file(path) + "\n";
  return sha256_hex(list);
}

void write_manifest(const fs::path& dir, const std::string& stage,
                    const std::vector<std::pair<std::string, std::string>>& input_digests, const json& counts,
                    std::uint64_t seed, const json& params) {
  json inputs = json::object();
  for (const auto& [name, digest] : input_digests) inputs[name] = digest;
  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      files.emplace_back(fs::relative(e.path(), dir).generic_string(), e.path());
  std::sort(files.begin(), files.end());
  json outputs = json::object();
  for (const auto& [name, path] : files) outputs[name] = sha256_file(path);
  write_json(dir / "manifest.json", {{"stage", stage},
                                     {"seed", seed},
                                     {"inputs", inputs},
                                     {"outputs", outputs},
                                     {"counts", counts},
                                     {"params", params.is_null() ? json::object() : params}});
}

// ---- run-all ----

RunSummary run_all(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path root = cfg.paths.output;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw Error(ErrorCode::config, "output directory " + root.string() + " is not writable");
  fs::remove(root / "report.md", ec);
  for (const char* s : kStages) fs::remove_all(root / s, ec);

  RunSummary summary;
  summary.output = root;
  const auto seed = cfg.seed;
  auto hash_of = [&](const fs::path& p) { return digest_path(p); };
  auto rel = [&](const fs::path& p) { return fs::relative(p, root).generic_string(); };

  // 01 parse
  const auto d1 = fresh_dir(root / kStages[0]);
  const auto screened = in_stage("parse", [&] {
    const auto map = filings::CusipMap::load(cfg.paths.cusip_map);
    const auto cache = is_remote(cfg.paths.filings) ? root / "filings_cache" : fs::path{};
    auto po = parse_documents(cfg.paths.filings, cfg.strict, cfg.jobs, cache);
    auto res = filings::screen(po.parsed, cfg.filters, &map);
    filings::write_jsonl(d1 / "transactions.jsonl", po.parsed);
    filings::write_jsonl(d1 / "screened.jsonl", res.kept);
    filings::write_rejections_jsonl(d1 / "rejected.jsonl", res.rejected);
    std::string warn;
    for (const auto& w : po.warnings) warn += "warning " + w + "\n";
    for (const auto& [doc, err] : po.failed) warn += "failed " + doc + ": " + err + "\n";
    text::write_file(d1 / "warnings.txt", warn);
    write_manifest(d1, "parse", {{"filings", po.digest}, {"cusip_map", hash_of(cfg.paths.cusip_map)}},
                   {{"documents", po.documents},
                    {"failed_documents", po.failed.size()},
                    {"transactions", po.parsed.size()},
                    {"screened", res.kept.size()},
                    {"rejected", res.rejected.size()},
                    {"warnings", po.warnings.size()}},
                   seed,
                   {{"max_lag_days", cfg.filters.max_lag_days},
                    {"min_value", cfg.filters.min_value},
                    {"strict", cfg.strict}});
    return std::move(res.kept);
  });

  // 02 ingest
  const auto d2 = fresh_dir(root / kStages[1]);
  auto store = in_stage("ingest", [&] {
    return market::MarketStore(market::load_bars(cfg.paths.bars).bars,
                               market::load_factors(cfg.paths.factors, cfg.percent_factors));
  });
  market::SpyMarket spy(store);
  const market::MarketView& view = cfg.audit_reads ? static_cast<const market::MarketView&>(spy) : store;
  const auto kept = in_stage("ingest", [&] {
    market::save_cache(d2 / "market", store);
    spy.reset();
    auto res = filings::apply_filters(screened, cfg.filters, view, cfg.jobs);
    filings::write_jsonl(d2 / "kept.jsonl", res.kept);
    filings::write_rejections_jsonl(d2 / "rejected.jsonl", res.rejected);
    std::map<std::string, std::size_t> reasons;
    for (const auto& r : res.rejected) ++reasons[filings::to_string(r.reason)];
    write_manifest(d2, "ingest",
                   {{"bars", hash_of(cfg.paths.bars)},
                    {"factors", hash_of(cfg.paths.factors)},
                    {rel(d1 / "screened.jsonl"), hash_of(d1 / "screened.jsonl")}},
                   {{"tickers", store.bars().size()},
                    {"bars", store.bar_count()},
                    {"trading_days", store.calendar().size()},
                    {"screened", screened.size()},
                    {"kept", res.kept.size()},
                    {"rejected", res.rejected.size()},
                    {"rejected_by_reason", reasons},
                    {"lookahead", audit_json(spy)}},
                   seed,
                   {{"min_cap", cfg.filters.min_cap},
                    {"max_cap", cfg.filters.max_cap},
                    {"min_addv", cfg.filters.min_addv},
                    {"addv_window_days", cfg.filters.addv_window_days},
                    {"percent_factors", cfg.percent_factors}});
    return std::move(res.kept);
  });
  std::size_t audited_reads = spy.scoped_reads();
  std::size_t audited_violations = spy.violation_count();

  // 03 label
  const auto d3 = fresh_dir(root / kStages[2]);
  const auto labeled = in_stage("label", [&] {
    const auto events = eventstudy::aggregate_events(kept);
    spy.reset();
    auto out = eventstudy::label_events(events, view, cfg.label, cfg.jobs);
    eventstudy::write_events_jsonl(d3 / "events.jsonl", out);
    std::size_t ok = 0, pos = 0;
    for (const auto& e : out)
      if (e.outcome) {
        ++ok;
        pos += static_cast<std::size_t>(e.outcome->label);
      }
    write_manifest(d3, "label",
                   {{rel(d2 / "kept.jsonl"), hash_of(d2 / "kept.jsonl")}, {rel(d2 / "market"), hash_of(d2 / "market")}},
                   {{"events", out.size()},
                    {"labeled", ok},
                    {"skipped", out.size() - ok},
                    {"positives", pos},
                    {"lookahead", audit_json(spy)}},
                   seed,
                   {{"horizon", cfg.label.horizon},
                    {"car_threshold", cfg.label.car_threshold},
                    {"estimation_window", cfg.label.estimation_window},
                    {"min_obs", cfg.label.min_obs},
                    {"compound", cfg.label.compound}});
    return out;
  });
  audited_reads += spy.scoped_reads();
  audited_violations += spy.violation_count();
  summary.events = labeled.size();

  // 04 features
  const auto d4 = fresh_dir(root / kStages[3]);
  const auto matrix = in_stage("features", [&] {
    const auto sectors = features::load_sector_map(cfg.paths.sectors);
    spy.reset();
    auto m = features::build_matrix(labeled, view, sectors, cfg.features, cfg.jobs);
    if (cfg.strict) {
      for (const auto& s : m.skipped)
        if (s.reason.rfind("unlabeled", 0) != 0)
          throw Error(ErrorCode::data_gap, "event " + s.key.str() + " has no features: " + s.reason);
    }
    features::write_csv(d4 / "features.csv", m);
    features::write_skips_jsonl(d4 / "skipped.jsonl", m.skipped);
    write_manifest(d4, "features",
                   {{rel(d3 / "events.jsonl"), hash_of(d3 / "events.jsonl")},
                    {rel(d2 / "market"), hash_of(d2 / "market")},
                    {"sectors", hash_of(cfg.paths.sectors)}},
                   {{"rows", m.rows.size()}, {"skipped", m.skipped.size()}, {"lookahead", audit_json(spy)}}, seed,
                   {{"range_window", cfg.features.range_window},
                    {"vol_window", cfg.features.vol_window},
                    {"first_purchase_days", cfg.features.first_purchase_days},
                    {"history_window_days", cfg.features.history_window_days}});
    return m;
  });
  audited_reads += spy.scoped_reads();
  audited_violations += spy.violation_count();
  summary.feature_rows = matrix.rows.size();

  // 05 train
  const auto d5 = fresh_dir(root / kStages[4]);
  learn::Split split;
  auto artifact = in_stage("train", [&] {
    split = learn::temporal_split(learn::from_features(matrix), cfg.split);
    features::write_csv(d5 / "train.csv", rows_between(matrix, std::nullopt, cfg.split.train_end));
    features::write_csv(d5 / "valid.csv", rows_between(matrix, cfg.split.train_end, cfg.split.valid_end));
    features::write_csv(d5 / "test.csv", rows_between(matrix, cfg.split.valid_end, cfg.split.test_end));
    learn::ModelArtifact a;
    a.split = cfg.split;
    learn::GbmConfig best = cfg.grid.front();
    if (cfg.grid.size() > 1) {
      a.tuning = learn::tscv_tune(split.train, cfg.grid, cfg.tuning_folds);
      best = a.tuning->best;
    }
    a.gbm = learn::train_gbm(split.train, best);
    a.logistic = learn::train_logistic(split.train, cfg.logistic_l2);
    learn::save_model(d5 / "model.json", a);
    json tuning = json::array();
    if (a.tuning)
      for (const auto& s : a.tuning->scores)
        tuning.push_back({{"config", learn::to_json(s.config)}, {"mean_auc", s.mean_auc}, {"folds_used", s.folds_used}});
    write_json(d5 / "tuning.json", {{"best", learn::to_json(best)}, {"scores", tuning}});
    write_manifest(d5, "train", {{rel(d4 / "features.csv"), hash_of(d4 / "features.csv")}},
                   {{"train", split.train.rows()},
                    {"valid", split.valid.rows()},
                    {"test", split.test.rows()},
                    {"train_positive_rate", split.train.positive_rate()},
                    {"grid", cfg.grid.size()}},
                   seed,
                   {{"train_end", cfg.split.train_end.iso()},
                    {"valid_end", cfg.split.valid_end.iso()},
                    {"test_end", cfg.split.test_end.iso()},
                    {"folds", cfg.tuning_folds},
                    {"logistic_l2", cfg.logistic_l2}});
    return a;
  });

  // 06 threshold
  const auto d6 = fresh_dir(root / kStages[5]);
  in_stage("tune-threshold", [&] {
    const auto gs = learn::predict(artifact.gbm, split.valid);
    const auto ls = learn::predict(*artifact.logistic, split.valid);
    artifact.threshold = learn::optimize_threshold(gs, split.valid.y);
    artifact.logistic_threshold = learn::optimize_threshold(ls, split.valid.y);
    artifact.threshold_optimized = true;
    learn::save_model(d6 / "model.json", artifact);
    const auto gf = learn::f1_at(gs, split.valid.y, artifact.threshold);
    const auto lf = learn::f1_at(ls, split.valid.y, artifact.logistic_threshold);
    write_json(d6 / "threshold.json", {{"gbm_threshold", artifact.threshold},
                                        {"gbm_valid_f1", gf.value()},
                                        {"logistic_threshold", artifact.logistic_threshold},
                                        {"logistic_valid_f1", lf.value()},
                                        {"valid_rows", split.valid.rows()}});
    write_manifest(d6, "tune-threshold",
                   {{rel(d5 / "model.json"), hash_of(d5 / "model.json")}, {rel(d5 / "valid.csv"), hash_of(d5 / "valid.csv")}},
                   {{"valid", split.valid.rows()}}, seed, {{"grid", "0.01..0.99 step 0.01"}});
    return 0;
  });
  summary.threshold = artifact.threshold;

  // 07 evaluate
  const auto d7 = fresh_dir(root / kStages[6]);
  in_stage("evaluate", [&] {
    const auto gs = learn::predict(artifact.gbm, split.test);
    const auto ls = learn::predict(*artifact.logistic, split.test);
    const auto gr = evaluate::evaluate_scores(gs, split.test.y, artifact.threshold);
    const auto lr = evaluate::evaluate_scores(ls, split.test.y, artifact.logistic_threshold);
    const auto imp = evaluate::importance_report(artifact.gbm);
    summary.gbm_test_auc = gr.auc;
    summary.logistic_test_auc = lr.auc;
    write_json(d7 / "report.json", {{"gbm", evaluate::to_json(gr)},
                                     {"logistic", evaluate::to_json(lr)},
                                     {"importance", evaluate::to_json(imp)}});
    std::string t2 = "model,auc,threshold,precision,recall,f1,n\n";
    auto line = [&](const char* name, const evaluate::EvaluationReport& r) {
      t2 += std::string(name) + "," + opt_fixed(r.auc, 4) + "," + text::fixed(r.metrics.threshold, 2) + "," +
            text::fixed(r.metrics.precision, 4) + "," + text::fixed(r.metrics.recall, 4) + "," +
            text::fixed(r.metrics.f1, 4) + "," + std::to_string(r.n) + "\n";
    };
    line("gbm", gr);
    line("logistic", lr);
    text::write_file(d7 / "table2.csv", t2);
    std::string t3 = "rank,feature,importance,average_gain,splits\n";
    for (const auto& e : imp.ranking)
      t3 += std::to_string(e.rank) + "," + e.feature + "," + text::fixed(e.importance, 4) + "," +
            text::fixed(e.average_gain, 4) + "," + std::to_string(e.splits) + "\n";
    text::write_file(d7 / "table3.csv", t3);
    const auto plots = d7 / "plots";
    fs::create_directories(plots);
    evaluate::write_plots(plots, "gbm", gr);
    evaluate::write_plots(plots, "logistic", lr);
    evaluate::write_importance_plot(plots, imp);
    write_manifest(d7, "evaluate",
                   {{rel(d6 / "model.json"), hash_of(d6 / "model.json")}, {rel(d5 / "test.csv"), hash_of(d5 / "test.csv")}},
                   {{"test", split.test.rows()}, {"test_positives", std::count(split.test.y.begin(), split.test.y.end(), 1)}},
                   seed, json::object());
    return 0;
  });

  // 08 stratify
  const auto d8 = fresh_dir(root / kStages[7]);
  in_stage("stratify", [&] {
    std::unordered_map<std::string, double> dev;
    std::unordered_map<std::string, const eventstudy::Event*> by_key;
    for (const auto& e : labeled) by_key.emplace(e.event.key.str(), &e.event);
    std::vector<eventstudy::Event> events;
    for (const auto& r : matrix.rows) {
      const auto k = r.key.str();
      dev[k] = r.x[features::kPriceDeviation];
      events.push_back(*by_key.at(k));
    }
    strata::RegimeSeries regime;
    if (!cfg.paths.regime.empty()) regime = strata::load_regime(cfg.paths.regime);
    strata::SweepConfig sc;
    sc.horizons = cfg.horizons;
    sc.regime_horizon = cfg.label.horizon;
    sc.regime_threshold = cfg.regime_threshold;
    sc.buckets = cfg.buckets;
    sc.label = cfg.label;
    sc.label.strict = false;
    sc.jobs = cfg.jobs;
    spy.reset();
    const auto rep = strata::robustness_sweep(events, dev, view, sc, cfg.paths.regime.empty() ? nullptr : &regime);
    bool main_written = false;
    for (const auto& t : rep.tables) {
      const std::string stem =
          t.partition == "all" ? "table4_h" + std::to_string(t.horizon) : "table4_" + t.partition;
      strata::write_table_csv(d8 / (stem + ".csv"), t);
      strata::write_detail_csv(d8 / (stem + "_detail.csv"), t);
      if (t.partition == "all" && t.horizon == cfg.label.horizon && !main_written) {
        strata::write_table_csv(d8 / "table4.csv", t);
        strata::write_detail_csv(d8 / "table4_detail.csv", t);
        main_written = true;
      }
    }
    if (!main_written) {
      // The label horizon was not swept; tabulate it from the stored outcomes.
      std::vector<strata::StrataEvent> se;
      for (const auto& r : matrix.rows) se.push_back({r.key.issuer_id, r.x[features::kPriceDeviation], r.car, r.label});
      const auto t = strata::make_table(se, cfg.buckets, cfg.label.horizon);
      strata::write_table_csv(d8 / "table4.csv", t);
      strata::write_detail_csv(d8 / "table4_detail.csv", t);
    }
    write_json(d8 / "sweep.json", strata::to_json(rep));
    std::vector<std::pair<std::string, std::string>> inputs{{rel(d3 / "events.jsonl"), hash_of(d3 / "events.jsonl")},
                                                            {rel(d4 / "features.csv"), hash_of(d4 / "features.csv")},
                                                            {rel(d2 / "market"), hash_of(d2 / "market")}};
    if (!cfg.paths.regime.empty()) inputs.emplace_back("regime", hash_of(cfg.paths.regime));
    write_manifest(d8, "stratify", inputs,
                   {{"events", events.size()},
                    {"tables", rep.tables.size()},
                    {"skipped", rep.skipped.size()},
                    {"regime_unmatched", rep.regime_unmatched},
                    {"lookahead", audit_json(spy)}},
                   seed,
                   {{"horizons", cfg.horizons},
                    {"edges", cfg.buckets.edges},
                    {"regime_threshold", cfg.regime_threshold}});
    return 0;
  });
  audited_reads += spy.scoped_reads();
  audited_violations += spy.violation_count();
  summary.lookahead_reads = audited_reads;
  summary.lookahead_violations = audited_violations;

  text::write_file(root / "report.md", render_report(root));
  return summary;
}

// ---- report ----

std::string render_report(const fs::path& run_dir) {
  std::vector<std::string> missing_stages;
  for (const char* s : kStages)
    if (!fs::exists(run_dir / s / "manifest.json")) missing_stages.emplace_back(s);
  if (missing_stages.size() == std::size(kStages)) {
    std::string list;
    for (const auto& s : missing_stages) list += " " + s;
    throw Error(ErrorCode::validation, "no stage artifacts under " + run_dir.string() + "; missing:" + list);
  }

  std::string md = "# Insider purchase signal: run report\n\n";
  auto section = [&](const std::string& title, const fs::path& rel_path, const std::string& stage) {
    md += "## " + title + "\n\n";
    const auto p = run_dir / rel_path;
    if (fs::exists(p))
      md += markdown_table(read_table(p));
    else
      md += "_Missing `" + rel_path.generic_string() + "`: stage " + stage + " did not complete._\n";
    md += "\n";
  };
  section("Classification on the test period", "07_evaluate/table2.csv", "evaluate");
  section("Feature importance (share of total split gain)", "07_evaluate/table3.csv", "evaluate");
  section("CAR by price deviation", "08_stratify/table4.csv", "stratify");
  section("CAR by price deviation: robust statistics", "08_stratify/table4_detail.csv", "stratify");

  if (fs::exists(run_dir / "08_stratify")) {
    std::vector<fs::path> extra;
    for (const auto& e : fs::directory_iterator(run_dir / "08_stratify")) {
      const auto name = e.path().filename().string();
      if (name.rfind("table4_", 0) == 0 && name.find("_detail") == std::string::npos) extra.push_back(e.path());
    }
    std::sort(extra.begin(), extra.end());
    if (!extra.empty()) {
      md += "## Robustness tables\n\n";
      for (const auto& p : extra) {
        md += "### " + p.stem().string() + "\n\n" + markdown_table(read_table(p)) + "\n";
      }
    }
  }

  md += "## Provenance\n\n| stage | manifest sha256 | counts |\n| --- | --- | --- |\n";
  std::size_t violations = 0, reads = 0;
  bool audited = false;
  for (const char* s : kStages) {
    const auto p = run_dir / s / "manifest.json";
    if (!fs::exists(p)) {
      md += std::string("| ") + s + " | missing | |\n";
      continue;
    }
    const auto j = json::parse(text::read_file(p));
    std::string counts;
    for (const auto& [k, v] : j.at("counts").items()) {
      if (k == "lookahead") {
        audited = true;
        violations += v.at("violations").get<std::size_t>();
        reads += v.at("scoped_reads").get<std::size_t>();
        continue;
      }
      if (v.is_object()) continue;
      if (!counts.empty()) counts += ", ";
      counts += k + "=" + (v.is_number_float() ? text::fixed(v.get<double>(), 4) : v.dump());
    }
    md += std::string("| ") + s + " | `" + sha256_file(p) + "` | " + counts + " |\n";
  }
  md += "\n";
  if (audited)
    md += "Look-ahead audit: " + std::to_string(violations) + " violations in " + std::to_string(reads) +
          " scoped market reads.\n";
  if (!missing_stages.empty()) {
    md += "\nIncomplete bundle, missing stages:";
    for (const auto& s : missing_stages) md += " " + s;
    md += "\n";
  }
  return md;
}

}  // namespace insider::pipeline
