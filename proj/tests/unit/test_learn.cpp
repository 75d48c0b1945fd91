#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "insider/error.hpp"
#include "insider/evaluate.hpp"
#include "insider/learn.hpp"
#include "insider/rng.hpp"
#include "support.hpp"

using namespace insider;
using namespace insider::learn;

namespace {

Dataset empty_with(std::size_t p) {
  Dataset d;
  for (std::size_t j = 0; j < p; ++j) d.columns.push_back("x" + std::to_string(j));
  return d;
}

/// y = 1{x0 > 0 XOR x1 > 0}; x2 is noise.
Dataset xor_data(std::size_t n, Rng& rng) {
  Dataset d = empty_with(3);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), c = rng.normal();
    d.push(std::vector{a, b, c}, (a > 0) != (b > 0) ? 1 : 0);
  }
  return d;
}

/// Logistic truth on a few columns plus a step in x1.
Dataset signal_data(std::size_t n, Rng& rng, Date start = Date(2015, 1, 1)) {
  Dataset d = empty_with(4);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.normal(), b = rng.normal(), c = rng.uniform(0, 3), e = rng.normal();
    const double z = 1.5 * a - 1.0 * (b > 0.3) + 0.4 * c * a;
    d.push(std::vector{a, b, c, e}, rng.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1 : 0,
           start + static_cast<int>(i), "r" + std::to_string(i));
  }
  return d;
}

std::string dump_trees(const GbmModel& m) {
  ModelArtifact a;
  a.gbm = m;
  return to_json(a).dump();
}

/// Exhaustive oracle: F1 from counts at every grid tau, best kept on ties toward larger tau.
double brute_threshold(const std::vector<double>& s, const std::vector<int>& y) {
  double best_f1 = -1.0, best_tau = 0.0;
  for (int i = 99; i >= 1; --i) {
    const double tau = i / 100.0;
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k] >= tau) (y[k] ? tp : fp) += 1;
      else if (y[k]) fn += 1;
    }
    const double f1 = 2 * tp / (2 * tp + fp + fn);
    if (f1 > best_f1) best_f1 = f1, best_tau = tau;
  }
  return best_tau;
}

}  // namespace

TEST_SUITE("learn") {

TEST_CASE("temporal_split examples") {
  Dataset d = empty_with(1);
  d.push(std::vector{1.0}, 0, Date(2020, 5, 1));
  d.push(std::vector{2.0}, 1, Date(2023, 5, 1));
  d.push(std::vector{3.0}, 0, Date(2024, 5, 1));
  d.push(std::vector{4.0}, 1, Date(2022, 12, 31));
  d.push(std::vector{5.0}, 1, Date(2025, 1, 1));
  const auto s = temporal_split(d, SplitSpec{});
  CHECK(s.train.rows() == 2);
  CHECK(s.train.at(1, 0) == 4.0);
  CHECK(s.valid.rows() == 1);
  CHECK(s.test.rows() == 1);
  CHECK(s.test.at(0, 0) == 3.0);

  Dataset late = empty_with(1);
  late.push(std::vector{1.0}, 0, Date(2024, 2, 1));
  try {
    (void)temporal_split(late, SplitSpec{});
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    CHECK(std::string(e.what()).find("train") != std::string::npos);
  }
  SplitSpec bad;
  bad.valid_end = bad.train_end;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("gbm: base-only model predicts the positive rate") {
  Rng rng(1);
  const auto d = signal_data(500, rng);
  GbmConfig cfg;
  cfg.n_trees = 0;
  const auto m = train_gbm(d, cfg);
  CHECK(m.trees.empty());
  for (double p : predict(m, d)) CHECK(std::abs(p - d.positive_rate()) <= 1e-12);
  CHECK(std::all_of(m.feature_gain.begin(), m.feature_gain.end(), [](double g) { return g == 0.0; }));
  CHECK(evaluate::importance_report(m).ranking.empty());
  CHECK_FALSE(evaluate::importance_report(m).warnings.empty());

  // No admissible split: also base-only, not an error.
  cfg.n_trees = 5;
  cfg.min_child_weight = 1e9;
  const auto stump = train_gbm(d, cfg);
  for (double p : predict(stump, d)) CHECK(std::abs(p - d.positive_rate()) <= 1e-12);
}

TEST_CASE("gbm: XOR rule is learned, logistic cannot") {
  Rng rng(2024);
  const auto train = xor_data(2000, rng);
  const auto test = xor_data(1000, rng);
  // The rule really is the labelling.
  for (std::size_t i = 0; i < test.rows(); ++i)
    CHECK(test.y[i] == ((test.at(i, 0) > 0) != (test.at(i, 1) > 0) ? 1 : 0));
  GbmConfig cfg;
  cfg.n_trees = 100;
  cfg.max_depth = 3;
  const auto gbm = train_gbm(train, cfg);
  const auto lr = train_logistic(train, 1.0);
  const double g = evaluate::auc(predict(gbm, test), test.y);
  const double l = evaluate::auc(predict(lr, test), test.y);
  CHECK(g >= 0.95);
  CHECK(l <= 0.60);
}

TEST_CASE("gbm: determinism and serialization") {
  Rng rng(5);
  const auto d = signal_data(800, rng);
  GbmConfig cfg;
  cfg.n_trees = 30;
  cfg.subsample = 0.7;
  cfg.seed = 9;
  const auto a = train_gbm(d, cfg);
  const auto b = train_gbm(d, cfg);
  CHECK(dump_trees(a) == dump_trees(b));
  cfg.seed = 10;
  CHECK(dump_trees(train_gbm(d, cfg)) != dump_trees(a));

  ModelArtifact art;
  art.gbm = a;
  art.logistic = train_logistic(d, 2.0);
  art.threshold = 0.23;
  art.logistic_threshold = 0.31;
  art.threshold_optimized = true;
  const auto dir = testing::scratch("learn_model");
  save_model(dir / "m.json", art);
  const auto back = load_model(dir / "m.json");
  CHECK(back.threshold == 0.23);
  CHECK(back.logistic_threshold == 0.31);
  CHECK(back.threshold_optimized);
  CHECK(back.gbm.config == a.config);
  CHECK(predict(back.gbm, d) == predict(a, d));
  REQUIRE(back.logistic.has_value());
  CHECK(predict(*back.logistic, d) == predict(*art.logistic, d));
  CHECK(to_json(back).dump() == to_json(art).dump());
}

TEST_CASE("gbm: training loss decreases every round") {
  Rng rng(6);
  const auto d = signal_data(1000, rng);
  GbmConfig cfg;
  cfg.n_trees = 60;
  const auto m = train_gbm(d, cfg);
  REQUIRE(m.train_loss.size() == 61);
  for (std::size_t i = 1; i < m.train_loss.size(); ++i) CHECK(m.train_loss[i] <= m.train_loss[i - 1]);
  CHECK(m.train_loss.back() < m.train_loss.front());
}

TEST_CASE("gbm: feature gain is a distribution and ignores row order") {
  Rng rng(7);
  const auto d = signal_data(1000, rng);
  GbmConfig cfg;
  cfg.n_trees = 40;
  const auto m = train_gbm(d, cfg);
  CHECK(std::all_of(m.feature_gain.begin(), m.feature_gain.end(), [](double g) { return g >= 0.0; }));
  CHECK(std::accumulate(m.feature_gain.begin(), m.feature_gain.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<std::size_t> perm(d.rows());
  std::iota(perm.begin(), perm.end(), 0);
  Rng shuffle(8);
  for (std::size_t i = perm.size() - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<std::size_t>(shuffle.integer(0, static_cast<std::int64_t>(i)))]);
  const auto pm = train_gbm(d.select(perm), cfg);
  for (std::size_t j = 0; j < d.cols(); ++j) CHECK(std::abs(pm.feature_gain[j] - m.feature_gain[j]) <= 1e-9);
  const auto pa = predict(m, d), pb = predict(pm, d);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(std::abs(pa[i] - pb[i]) <= 1e-9);
}

TEST_CASE("gbm: strictly increasing column transform leaves predictions unchanged") {
  Rng rng(12);
  auto train = signal_data(1500, rng);
  auto test = signal_data(500, rng);
  GbmConfig cfg;
  cfg.n_trees = 40;
  cfg.n_bins = 32;
  const auto a = predict(train_gbm(train, cfg), test);
  for (auto* d : {&train, &test})
    for (std::size_t i = 0; i < d->rows(); ++i) d->x[i * d->cols()] = std::exp(d->x[i * d->cols()] / 3.0);
  const auto b = predict(train_gbm(train, cfg), test);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("gbm: long boosting separates a deterministic toy set") {
  Rng rng(13);
  Dataset d = empty_with(2);
  for (int i = 0; i < 400; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    d.push(std::vector{a, b}, a * a + b * b < 0.5 ? 1 : 0);
  }
  GbmConfig cfg;
  cfg.n_trees = 400;
  cfg.min_child_weight = 0.5;
  cfg.n_bins = 128;
  CHECK(evaluate::auc(predict(train_gbm(d, cfg), d), d.y) >= 0.999);
}

TEST_CASE("predict contracts") {
  Rng rng(14);
  const auto d = signal_data(300, rng);
  GbmConfig cfg;
  cfg.n_trees = 20;
  const auto m = train_gbm(d, cfg);
  CHECK(predict(m, empty_with(4)).empty());
  for (double p : predict(m, d)) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  Dataset wrong = empty_with(2);
  wrong.push(std::vector{1.0, 2.0}, 0);
  try {
    (void)predict(m, wrong);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::shape);
  }
  // Extreme margins still land strictly inside (0, 1).
  GbmModel extreme = m;
  extreme.base_score = 800.0;
  CHECK(predict_one(extreme, d.row(0)) < 1.0);
  extreme.base_score = -800.0;
  CHECK(predict_one(extreme, d.row(0)) > 0.0);
}

TEST_CASE("degenerate labels are rejected") {
  Dataset d = empty_with(2);
  for (int i = 0; i < 10; ++i) d.push(std::vector{1.0 * i, 2.0}, 1);
  try {
    (void)train_gbm(d, GbmConfig{});
    FAIL("expected degenerate_labels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_labels);
  }
  CHECK_THROWS_AS((void)train_logistic(d, 1.0), Error);
  GbmConfig bad;
  bad.subsample = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("logistic examples") {
  Dataset sep = empty_with(2);
  for (int i = 0; i < 40; ++i) sep.push(std::vector{static_cast<double>(i), 0.0}, i >= 20 ? 1 : 0);
  const auto m = train_logistic(sep, 1.0);
  const auto p = predict(m, sep);
  for (int i = 0; i < 20; ++i)
    for (int j = 20; j < 40; ++j) CHECK(p[static_cast<std::size_t>(j)] > p[static_cast<std::size_t>(i)]);
  CHECK(m.dropped[1]);
  CHECK(m.coef[1] == 0.0);
  CHECK_FALSE(m.warnings.empty());
  CHECK(m.gradient_norm < 1e-8);
}

TEST_CASE("logistic: stationarity checked independently") {
  Rng rng(15);
  const auto d = signal_data(700, rng);
  const double l2 = 3.0;
  const auto m = train_logistic(d, l2);
  CHECK(m.gradient_norm < 1e-8);
  // Gradient of (1/n)(sum log loss + l2/2 |w|^2) at the returned weights.
  const auto n = static_cast<double>(d.rows());
  const auto pr = predict(m, d);
  std::vector<double> g(d.cols() + 1, 0.0);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const double r = pr[i] - d.y[i];
    g[0] += r / n;
    for (std::size_t j = 0; j < d.cols(); ++j) g[j + 1] += r * (d.at(i, j) - m.mean[j]) / m.sd[j] / n;
  }
  for (std::size_t j = 0; j < d.cols(); ++j) g[j + 1] += l2 / n * m.coef[j];
  for (double v : g) CHECK(std::abs(v) <= 1e-7);
}

TEST_CASE("tscv_tune examples") {
  Rng rng(16);
  const auto d = signal_data(900, rng);
  GbmConfig one;
  one.n_trees = 10;
  CHECK(tscv_tune(d, std::vector{one}, 3).best == one);

  GbmConfig base = one;
  base.n_trees = 0;
  GbmConfig learner = one;
  learner.n_trees = 40;
  const auto r = tscv_tune(d, std::vector{base, learner}, 3);
  CHECK(r.best == learner);
  REQUIRE(r.scores.size() == 2);
  CHECK(r.scores[0].mean_auc == 0.5);
  CHECK(r.scores[1].mean_auc > 0.6);
  CHECK(r.scores[1].folds_used == 3);

  // Identical scores: fewer trees, then shallower, win.
  GbmConfig frozen_a = one, frozen_b = one, frozen_c = one;
  frozen_a.min_child_weight = frozen_b.min_child_weight = frozen_c.min_child_weight = 1e9;
  frozen_a.n_trees = 20;
  frozen_b.n_trees = 10;
  frozen_b.max_depth = 3;
  frozen_c.n_trees = 10;
  frozen_c.max_depth = 2;
  CHECK(tscv_tune(d, std::vector{frozen_a, frozen_b, frozen_c}, 2).best == frozen_c);

  try {
    (void)tscv_tune(d.slice(0, 5), std::vector{one}, 10);
    FAIL("expected tuning error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::tuning);
  }
  CHECK_THROWS_AS((void)tscv_tune(d, std::vector{one}, 1), Error);
}

TEST_CASE("optimize_threshold examples") {
  CHECK(optimize_threshold(std::vector{0.9, 0.8, 0.1}, std::vector{1, 1, 0}) == 0.80);
  CHECK(optimize_threshold(std::vector{1.0, 0.0, 1.0, 0.0}, std::vector{1, 0, 1, 0}) == 0.99);
  try {
    (void)optimize_threshold(std::vector{0.3, 0.4}, std::vector{0, 0});
    FAIL("expected threshold error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::threshold);
  }
  const auto f = f1_at(std::vector{0.9, 0.8, 0.1, 0.2}, std::vector{1, 0, 0, 1}, 0.5);
  CHECK(f.num == 2);
  CHECK(f.den == 4);
}

TEST_CASE("property: optimize_threshold equals the exhaustive grid oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 300));
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      // Half the trials put scores on the grid itself so ties with tau occur.
      s[i] = coarse ? static_cast<double>(rng.integer(0, 100)) / 100.0 : rng.uniform();
      y[i] = rng.bernoulli(0.1 + 0.6 * s[i]) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    CHECK(optimize_threshold(s, y) == brute_threshold(s, y));
  }
}

}  // TEST_SUITE
