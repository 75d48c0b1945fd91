// insider: command-line front end for the purchase-signal pipeline.

#include <CLI11.hpp>
#include <iostream>
#include <nlohmann/json.hpp>
#include <unordered_map>

#include "insider/config.hpp"
#include "insider/error.hpp"
#include "insider/evaluate.hpp"
#include "insider/eventstudy.hpp"
#include "insider/features.hpp"
#include "insider/filings.hpp"
#include "insider/learn.hpp"
#include "insider/pipeline.hpp"
#include "insider/strata.hpp"
#include "insider/synth.hpp"
#include "insider/text.hpp"

namespace fs = std::filesystem;
using namespace insider;

namespace {

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::data_gap:
      return 2;
    case ErrorCode::internal:
      return 3;
    default:
      return 1;
  }
}

config::Ini ini_or_empty(const std::string& path) { return path.empty() ? config::Ini{} : config::Ini::load(path); }

learn::SplitSpec parse_split(const std::string& s) {
  learn::SplitSpec spec;
  const auto parts = config::split_list(s);
  if (parts.size() < 2 || parts.size() > 3)
    throw Error(ErrorCode::config, "--split takes train_end,valid_end[,test_end]");
  spec.train_end = Date::parse(parts[0]);
  spec.valid_end = Date::parse(parts[1]);
  if (parts.size() == 3) spec.test_end = Date::parse(parts[2]);
  spec.validate();
  return spec;
}

// Rows with lo < disclosure <= hi.
learn::Dataset window(const features::FeatureMatrix& m, std::optional<Date> lo, Date hi) {
  features::FeatureMatrix sub;
  for (const auto& r : m.rows)
    if ((!lo || r.key.disclosure_date > *lo) && r.key.disclosure_date <= hi) sub.rows.push_back(r);
  return learn::from_features(sub);
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Insider purchase signal pipeline"};
  app.require_subcommand(1);
  unsigned jobs = 1;
  app.add_option("--jobs", jobs, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);

  // parse
  auto* parse = app.add_subcommand("parse", "Parse Form 4 documents and apply the sample filters");
  std::string p_in, p_map, p_filters, p_out, p_market, p_rejected;
  bool p_strict = false;
  parse->add_option("--in", p_in, "Directory of XML documents or http:// index")->required();
  parse->add_option("--map", p_map, "CUSIP map CSV")->required();
  parse->add_option("--filters", p_filters, "INI file with a [filters] section");
  parse->add_option("--market", p_market, "Market cache; enables the cap and volume filters");
  parse->add_option("--out", p_out, "Kept records (JSONL)")->required();
  parse->add_option("--rejected", p_rejected, "Rejected records (JSONL); default <out>.rejected.jsonl");
  parse->add_flag("--strict", p_strict, "Fail on the first unparseable document or data gap");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Normalize bars and factors into a market cache");
  std::string i_bars, i_factors, i_out;
  bool i_percent = false;
  ingest->add_option("--bars", i_bars)->required();
  ingest->add_option("--factors", i_factors)->required();
  ingest->add_option("--out", i_out, "Cache directory")->required();
  ingest->add_flag("--percent", i_percent, "Factor file is in percent");

  // label
  auto* label = app.add_subcommand("label", "Aggregate purchases into events and label them by CAR");
  std::string l_events, l_market, l_out;
  eventstudy::LabelConfig lcfg;
  label->add_option("--events", l_events, "Kept purchase records (JSONL)")->required();
  label->add_option("--market", l_market, "Market cache directory")->required();
  label->add_option("--out", l_out, "Labeled events (JSONL)")->required();
  label->add_option("--horizon", lcfg.horizon)->capture_default_str();
  label->add_option("--car-threshold", lcfg.car_threshold)->capture_default_str();
  label->add_option("--window", lcfg.estimation_window, "Estimation window in trading days")->capture_default_str();
  label->add_option("--min-obs", lcfg.min_obs)->capture_default_str();
  label->add_flag("--compound", lcfg.compound, "Compounded instead of summed CAR");
  label->add_flag("--strict", lcfg.strict);

  // features
  auto* feats = app.add_subcommand("features", "Build the feature matrix");
  std::string f_events, f_market, f_sectors, f_out, f_config, f_skipped;
  bool f_strict = false;
  feats->add_option("--events", f_events, "Labeled events (JSONL)")->required();
  feats->add_option("--market", f_market)->required();
  feats->add_option("--sectors", f_sectors, "CSV issuer_id,is_biotech")->required();
  feats->add_option("--out", f_out, "Feature CSV")->required();
  feats->add_option("--config", f_config, "INI file with a [features] section");
  feats->add_option("--skipped", f_skipped, "Skip records (JSONL); default <out>.skipped.jsonl");
  feats->add_flag("--strict", f_strict, "Fail when an event cannot be featurized");

  // train
  auto* train = app.add_subcommand("train", "Tune and fit the boosted trees and the logistic baseline");
  std::string t_features, t_split, t_grid, t_out;
  int t_folds = 3;
  double t_l2 = 1.0;
  std::uint64_t t_seed = 42;
  train->add_option("--features", t_features)->required();
  train->add_option("--split", t_split, "train_end,valid_end[,test_end]")->required();
  train->add_option("--grid", t_grid, "INI file with a [gbm] section");
  train->add_option("--out", t_out)->required();
  train->add_option("--folds", t_folds)->capture_default_str();
  train->add_option("--l2", t_l2, "Logistic penalty")->capture_default_str();
  train->add_option("--seed", t_seed)->capture_default_str();

  // tune-threshold
  auto* tune = app.add_subcommand("tune-threshold", "Choose the F1-optimal threshold on validation rows");
  std::string u_model, u_features, u_out;
  tune->add_option("--model", u_model)->required();
  tune->add_option("--features", u_features, "Feature CSV; rows in the validation window are used")->required();
  tune->add_option("--out", u_out, "Default: overwrite --model");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score the test period");
  std::string e_model, e_features, e_out, e_plots;
  eval->add_option("--model", e_model)->required();
  eval->add_option("--features", e_features, "Feature CSV; rows in the test window are used")->required();
  eval->add_option("--out", e_out, "Report JSON")->required();
  eval->add_option("--plots", e_plots, "Directory for SVG/CSV plots");

  // stratify
  auto* strat = app.add_subcommand("stratify", "Tabulate CAR by price-deviation bucket");
  std::string s_events, s_features, s_out, s_regime, s_market, s_horizons = "30", s_edges, s_json;
  double s_regime_threshold = 20.0;
  strat->add_option("--events", s_events, "Labeled events (JSONL)")->required();
  strat->add_option("--features", s_features)->required();
  strat->add_option("--out", s_out, "Table CSV for the label horizon")->required();
  strat->add_option("--horizons", s_horizons)->capture_default_str();
  strat->add_option("--regime", s_regime, "CSV date,value");
  strat->add_option("--regime-threshold", s_regime_threshold)->capture_default_str();
  strat->add_option("--market", s_market, "Market cache; needed for horizons other than the labeled one");
  strat->add_option("--edges", s_edges, "Interior bucket edges, comma separated");
  strat->add_option("--json", s_json, "Full sweep as JSON");

  // synth
  auto* syn = app.add_subcommand("synth", "Generate a synthetic input directory with planted signal");
  std::string y_config, y_out;
  syn->add_option("--config", y_config, "INI file with a [synth] section");
  syn->add_option("--out", y_out)->required();

  // run-all
  auto* run = app.add_subcommand("run-all", "Run every stage from one config file");
  std::string r_config, r_output;
  bool r_strict = false;
  run->add_option("--config", r_config)->required();
  run->add_option("--output", r_output, "Overrides paths.output");
  run->add_flag("--strict", r_strict);

  // report
  auto* rep = app.add_subcommand("report", "Render report.md from a run directory");
  std::string o_run, o_out;
  rep->add_option("--run", o_run)->required();
  rep->add_option("--out", o_out, "Default: <run>/report.md");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*parse) {
      const auto ini = ini_or_empty(p_filters);
      auto fcfg = pipeline::filter_config(ini);
      fcfg.strict = fcfg.strict || p_strict;
      const auto map = filings::CusipMap::load(p_map);
      const auto po = pipeline::parse_documents(p_in, fcfg.strict, jobs, fs::path(p_out).parent_path() / "filings_cache");
      auto res = filings::screen(po.parsed, fcfg, &map);
      if (!p_market.empty()) {
        const auto store = market::load_cache(p_market);
        auto full = filings::apply_filters(res.kept, fcfg, store, jobs);
        for (auto& r : full.rejected) res.rejected.push_back(std::move(r));
        res.kept = std::move(full.kept);
      }
      filings::write_jsonl(p_out, res.kept);
      filings::write_rejections_jsonl(p_rejected.empty() ? p_out + ".rejected.jsonl" : p_rejected, res.rejected);
      for (const auto& w : po.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& [doc, err] : po.failed) std::cerr << "failed: " << doc << ": " << err << "\n";
      print_json({{"documents", po.documents},
                  {"failed_documents", po.failed.size()},
                  {"transactions", po.parsed.size()},
                  {"kept", res.kept.size()},
                  {"rejected", res.rejected.size()},
                  {"market_filters", !p_market.empty()}});
    } else if (*ingest) {
      const market::MarketStore store(market::load_bars(i_bars).bars, market::load_factors(i_factors, i_percent));
      market::save_cache(i_out, store);
      print_json({{"tickers", store.bars().size()}, {"bars", store.bar_count()}, {"trading_days", store.calendar().size()}});
    } else if (*label) {
      lcfg.validate();
      const auto store = market::load_cache(l_market);
      const auto kept = filings::read_jsonl(l_events);
      const auto events = eventstudy::aggregate_events(kept);
      const auto out = eventstudy::label_events(events, store, lcfg, jobs);
      eventstudy::write_events_jsonl(l_out, out);
      std::size_t ok = 0, pos = 0;
      for (const auto& e : out)
        if (e.outcome) ++ok, pos += static_cast<std::size_t>(e.outcome->label);
      print_json({{"events", out.size()}, {"labeled", ok}, {"positives", pos}});
    } else if (*feats) {
      const auto fcfg = pipeline::feature_config(ini_or_empty(f_config));
      const auto store = market::load_cache(f_market);
      const auto events = eventstudy::read_events_jsonl(f_events);
      const auto sectors = features::load_sector_map(f_sectors);
      const auto m = features::build_matrix(events, store, sectors, fcfg, jobs);
      if (f_strict)
        for (const auto& s : m.skipped)
          if (s.reason.rfind("unlabeled", 0) != 0)
            throw Error(ErrorCode::data_gap, "event " + s.key.str() + " has no features: " + s.reason);
      features::write_csv(f_out, m);
      features::write_skips_jsonl(f_skipped.empty() ? f_out + ".skipped.jsonl" : f_skipped, m.skipped);
      print_json({{"rows", m.rows.size()}, {"skipped", m.skipped.size()}});
    } else if (*train) {
      const auto spec = parse_split(t_split);
      const auto grid = pipeline::gbm_grid(ini_or_empty(t_grid), t_seed);
      const auto matrix = features::read_csv(t_features);
      const auto split = learn::temporal_split(learn::from_features(matrix), spec);
      learn::ModelArtifact a;
      a.split = spec;
      auto best = grid.front();
      if (grid.size() > 1) {
        a.tuning = learn::tscv_tune(split.train, grid, t_folds);
        best = a.tuning->best;
      }
      a.gbm = learn::train_gbm(split.train, best);
      a.logistic = learn::train_logistic(split.train, t_l2);
      learn::save_model(t_out, a);
      print_json({{"train", split.train.rows()}, {"best", learn::to_json(best)}});
    } else if (*tune) {
      auto a = learn::load_model(u_model);
      const auto valid = window(features::read_csv(u_features), a.split.train_end, a.split.valid_end);
      a.threshold = learn::optimize_threshold(learn::predict(a.gbm, valid), valid.y);
      if (a.logistic) a.logistic_threshold = learn::optimize_threshold(learn::predict(*a.logistic, valid), valid.y);
      a.threshold_optimized = true;
      learn::save_model(u_out.empty() ? u_model : u_out, a);
      print_json({{"threshold", a.threshold}, {"logistic_threshold", a.logistic_threshold}, {"valid_rows", valid.rows()}});
    } else if (*eval) {
      const auto a = learn::load_model(e_model);
      const auto test = window(features::read_csv(e_features), a.split.valid_end, a.split.test_end);
      nlohmann::json j;
      const auto gr = evaluate::evaluate_scores(learn::predict(a.gbm, test), test.y, a.threshold);
      j["gbm"] = evaluate::to_json(gr);
      std::optional<evaluate::EvaluationReport> lr;
      if (a.logistic) {
        lr = evaluate::evaluate_scores(learn::predict(*a.logistic, test), test.y, a.logistic_threshold);
        j["logistic"] = evaluate::to_json(*lr);
      }
      const auto imp = evaluate::importance_report(a.gbm);
      j["importance"] = evaluate::to_json(imp);
      text::write_file(e_out, j.dump(2) + "\n");
      if (!e_plots.empty()) {
        fs::create_directories(e_plots);
        evaluate::write_plots(e_plots, "gbm", gr);
        if (lr) evaluate::write_plots(e_plots, "logistic", *lr);
        evaluate::write_importance_plot(e_plots, imp);
      }
      print_json({{"test_rows", test.rows()}, {"auc", gr.auc ? nlohmann::json(*gr.auc) : nlohmann::json()}});
    } else if (*strat) {
      const auto labeled = eventstudy::read_events_jsonl(s_events);
      const auto matrix = features::read_csv(s_features);
      strata::SweepConfig sc;
      sc.horizons.clear();
      for (const auto& h : config::split_list(s_horizons)) sc.horizons.push_back(static_cast<int>(text::to_int(h, "horizon")));
      if (!s_edges.empty()) {
        sc.buckets.edges.clear();
        for (const auto& e : config::split_list(s_edges)) sc.buckets.edges.push_back(text::to_double(e, "edge"));
      }
      sc.buckets.validate();
      sc.regime_threshold = s_regime_threshold;
      sc.jobs = jobs;
      std::unordered_map<std::string, double> dev;
      for (const auto& r : matrix.rows) dev[r.key.str()] = r.x[features::kPriceDeviation];
      std::vector<eventstudy::Event> events;
      std::vector<strata::StrataEvent> stored;
      int stored_horizon = 0;
      for (const auto& e : labeled) {
        const auto it = dev.find(e.event.key.str());
        if (it == dev.end() || !e.outcome) continue;
        events.push_back(e.event);
        stored.push_back({e.event.key.issuer_id, it->second, e.outcome->car, e.outcome->label});
        stored_horizon = e.outcome->horizon;
      }
      sc.regime_horizon = stored_horizon;
      strata::SweepReport report;
      if (!s_market.empty()) {
        sc.label.horizon = stored_horizon > 0 ? stored_horizon : 30;
        const auto store = market::load_cache(s_market);
        strata::RegimeSeries regime;
        if (!s_regime.empty()) regime = strata::load_regime(s_regime);
        report = strata::robustness_sweep(events, dev, store, sc, s_regime.empty() ? nullptr : &regime);
      } else {
        for (int h : sc.horizons)
          if (h != stored_horizon)
            throw Error(ErrorCode::config, "horizon " + std::to_string(h) + " needs --market (events are labeled at " +
                                               std::to_string(stored_horizon) + ")");
        report.tables.push_back(strata::make_table(stored, sc.buckets, stored_horizon));
        if (!s_regime.empty()) throw Error(ErrorCode::config, "--regime needs --market");
      }
      const strata::StrataTable* main_table = nullptr;
      for (const auto& t : report.tables)
        if (t.partition == "all" && (t.horizon == stored_horizon || !main_table)) main_table = &t;
      if (!main_table) throw Error(ErrorCode::validation, "no events to stratify");
      strata::write_table_csv(s_out, *main_table);
      const fs::path out(s_out);
      strata::write_detail_csv(out.parent_path() / (out.stem().string() + "_detail.csv"), *main_table);
      for (const auto& t : report.tables) {
        if (&t == main_table) continue;
        const auto stem = out.stem().string() + (t.partition == "all" ? "_h" + std::to_string(t.horizon) : "_" + t.partition);
        strata::write_table_csv(out.parent_path() / (stem + ".csv"), t);
      }
      if (!s_json.empty()) text::write_file(s_json, strata::to_json(report).dump(2) + "\n");
      print_json({{"events", stored.size()}, {"tables", report.tables.size()}});
    } else if (*syn) {
      const auto cfg = y_config.empty() ? synth::SynthConfig{} : synth::load_config(y_config);
      cfg.validate();
      const auto truth = synth::generate(cfg, y_out);
      print_json(synth::describe(truth));
    } else if (*run) {
      auto cfg = pipeline::load_config(r_config);
      if (!r_output.empty()) cfg.paths.output = r_output;
      if (app.get_option("--jobs")->count() > 0) cfg.jobs = jobs;
      if (r_strict) cfg.strict = cfg.filters.strict = cfg.label.strict = true;
      const auto s = pipeline::run_all(cfg);
      print_json({{"output", s.output.string()},
                  {"events", s.events},
                  {"feature_rows", s.feature_rows},
                  {"gbm_test_auc", s.gbm_test_auc ? nlohmann::json(*s.gbm_test_auc) : nlohmann::json()},
                  {"logistic_test_auc", s.logistic_test_auc ? nlohmann::json(*s.logistic_test_auc) : nlohmann::json()},
                  {"threshold", s.threshold},
                  {"lookahead_reads", s.lookahead_reads},
                  {"lookahead_violations", s.lookahead_violations}});
    } else if (*rep) {
      const auto md = pipeline::render_report(o_run);
      text::write_file(o_out.empty() ? fs::path(o_run) / "report.md" : fs::path(o_out), md);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
