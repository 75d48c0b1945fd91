#include "insider/learn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cfloat>
#include <cmath>
#include <deque>
#include <nlohmann/json.hpp>

#include "insider/error.hpp"
#include "insider/evaluate.hpp"
#include "insider/features.hpp"
#include "insider/rng.hpp"
#include "insider/text.hpp"

namespace insider::learn {

void Dataset::push(std::span<const double> r, int label, Date date, std::string id) {
  if (r.size() != cols())
    throw Error(ErrorCode::shape, "row has " + std::to_string(r.size()) + " values, expected " + std::to_string(cols()));
  x.insert(x.end(), r.begin(), r.end());
  y.push_back(label);
  dates.push_back(date);
  ids.push_back(std::move(id));
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  Dataset d;
  d.columns = columns;
  for (std::size_t i = begin; i < end; ++i) d.push(row(i), y[i], dates[i], ids[i]);
  return d;
}

Dataset Dataset::select(std::span<const std::size_t> idx) const {
  Dataset d;
  d.columns = columns;
  for (auto i : idx) d.push(row(i), y[i], dates[i], ids[i]);
  return d;
}

double Dataset::positive_rate() const {
  if (y.empty()) return 0.0;
  std::size_t pos = 0;
  for (int v : y) pos += v == 1;
  return static_cast<double>(pos) / static_cast<double>(y.size());
}

Dataset from_features(const features::FeatureMatrix& m) {
  Dataset d;
  d.columns.assign(features::kColumns.begin(), features::kColumns.end());
  for (const auto& r : m.rows) d.push(r.x, r.label, r.key.disclosure_date, r.key.str());
  return d;
}

void SplitSpec::validate() const {
  if (!(train_end < valid_end && valid_end < test_end))
    throw Error(ErrorCode::config, "split dates must satisfy train_end < valid_end < test_end");
}

Split temporal_split(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::size_t> tr, va, te;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const Date d = data.dates[i];
    if (d <= spec.train_end)
      tr.push_back(i);
    else if (d <= spec.valid_end)
      va.push_back(i);
    else if (d <= spec.test_end)
      te.push_back(i);
  }
  if (tr.empty()) throw Error(ErrorCode::config, "empty train partition (rows dated <= " + spec.train_end.iso() + ")");
  if (va.empty()) throw Error(ErrorCode::config, "empty validation partition");
  if (te.empty()) throw Error(ErrorCode::config, "empty test partition");
  return {data.select(tr), data.select(va), data.select(te)};
}

void GbmConfig::validate() const {
  if (n_trees < 0) throw Error(ErrorCode::config, "n_trees must be >= 0");
  if (max_depth < 1) throw Error(ErrorCode::config, "max_depth must be >= 1");
  if (!(learning_rate > 0)) throw Error(ErrorCode::config, "learning_rate must be positive");
  if (!(min_child_weight >= 0)) throw Error(ErrorCode::config, "min_child_weight must be >= 0");
  if (!(l2_reg >= 0)) throw Error(ErrorCode::config, "l2_reg must be >= 0");
  if (!(subsample > 0 && subsample <= 1)) throw Error(ErrorCode::config, "subsample must lie in (0, 1]");
  if (n_bins < 2 || n_bins > 65535) throw Error(ErrorCode::config, "n_bins must lie in [2, 65535]");
}

namespace {

double sigmoid(double m) {
  double p = 1.0 / (1.0 + std::exp(-m));
  if (p >= 1.0) p = std::nextafter(1.0, 0.0);
  if (p <= 0.0) p = DBL_TRUE_MIN;
  return p;
}

double softplus(double m) { return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }

void require_two_classes(const Dataset& d) {
  std::size_t pos = 0;
  for (int v : d.y) {
    if (v != 0 && v != 1) throw Error(ErrorCode::validation, "labels must be 0 or 1");
    pos += v;
  }
  if (pos == 0 || pos == d.rows())
    throw Error(ErrorCode::degenerate_labels, "training data needs both classes (" + std::to_string(pos) + " of " +
                                                  std::to_string(d.rows()) + " positive)");
}

// Cut points are observed values, so a strictly increasing transform of a column maps cuts onto cuts.
std::vector<double> quantile_cuts(std::vector<double> v, int n_bins) {
  std::sort(v.begin(), v.end());
  std::vector<double> uniq;
  for (double x : v)
    if (uniq.empty() || x != uniq.back()) uniq.push_back(x);
  std::vector<double> cuts;
  if (uniq.size() <= 1) return cuts;
  if (uniq.size() <= static_cast<std::size_t>(n_bins)) {
    cuts.assign(uniq.begin(), uniq.end() - 1);
    return cuts;
  }
  const std::size_t n = v.size();
  for (int i = 1; i < n_bins; ++i) {
    const std::size_t pos = std::max<std::size_t>(1, n * static_cast<std::size_t>(i) / static_cast<std::size_t>(n_bins));
    const double c = v[pos - 1];
    if (c < uniq.back() && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
  }
  return cuts;
}

std::uint16_t bin_of(double x, const std::vector<double>& cuts) {
  return static_cast<std::uint16_t>(std::lower_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

double mean_log_loss(const std::vector<double>& margin, const std::vector<int>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += softplus(margin[i]) - y[i] * margin[i];
  return s / static_cast<double>(y.size());
}

struct SplitChoice {
  int feature = -1;
  std::uint16_t bin = 0;
  double gain = 0.0;
};

}  // namespace

double Tree::output(std::span<const double> row) const {
  int k = 0;
  while (nodes[k].feature >= 0) k = row[nodes[k].feature] <= nodes[k].cut ? nodes[k].left : nodes[k].right;
  return nodes[k].value;
}

GbmModel train_gbm(const Dataset& train, const GbmConfig& cfg) {
  cfg.validate();
  require_two_classes(train);
  const std::size_t n = train.rows(), p = train.cols();
  GbmModel model;
  model.config = cfg;
  model.columns = train.columns;
  const double rate = train.positive_rate();
  model.base_score = std::log(rate / (1.0 - rate));

  model.cut_points.resize(p);
  std::vector<std::uint16_t> codes(n * p);  // column-major
  std::size_t max_bins = 1;
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = train.at(i, j);
    model.cut_points[j] = quantile_cuts(col, cfg.n_bins);
    max_bins = std::max(max_bins, model.cut_points[j].size() + 1);
    for (std::size_t i = 0; i < n; ++i) codes[j * n + i] = bin_of(col[i], model.cut_points[j]);
  }

  std::vector<double> margin(n, model.base_score), g(n), h(n);
  std::vector<double> total_gain(p, 0.0);
  model.split_counts.assign(p, 0);
  model.train_loss.push_back(mean_log_loss(margin, train.y));
  std::vector<double> hist_g(max_bins), hist_h(max_bins);
  const double lambda = cfg.l2_reg;

  for (int t = 0; t < cfg.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double pr = 1.0 / (1.0 + std::exp(-margin[i]));
      g[i] = pr - train.y[i];
      h[i] = pr * (1.0 - pr);
    }
    std::vector<std::uint32_t> rows;
    rows.reserve(n);
    if (cfg.subsample < 1.0) {
      auto rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(t));
      for (std::size_t i = 0; i < n; ++i)
        if (rng.uniform() < cfg.subsample) rows.push_back(static_cast<std::uint32_t>(i));
    } else {
      for (std::size_t i = 0; i < n; ++i) rows.push_back(static_cast<std::uint32_t>(i));
    }

    Tree tree;
    std::vector<std::uint16_t> node_bin;
    struct Work {
      int node;
      std::vector<std::uint32_t> rows;
      int depth;
    };
    std::deque<Work> queue;
    tree.nodes.emplace_back();
    node_bin.push_back(0);
    queue.push_back({0, std::move(rows), 0});
    while (!queue.empty()) {
      Work w = std::move(queue.front());
      queue.pop_front();
      double G = 0.0, H = 0.0;
      for (auto r : w.rows) {
        G += g[r];
        H += h[r];
      }
      SplitChoice best;
      if (w.depth < cfg.max_depth && w.rows.size() >= 2) {
        const double parent = G * G / (H + lambda);
        for (std::size_t j = 0; j < p; ++j) {
          const std::size_t nb = model.cut_points[j].size() + 1;
          if (nb < 2) continue;
          std::fill(hist_g.begin(), hist_g.begin() + nb, 0.0);
          std::fill(hist_h.begin(), hist_h.begin() + nb, 0.0);
          const std::uint16_t* col = codes.data() + j * n;
          for (auto r : w.rows) {
            hist_g[col[r]] += g[r];
            hist_h[col[r]] += h[r];
          }
          double GL = 0.0, HL = 0.0;
          for (std::size_t k = 0; k + 1 < nb; ++k) {
            GL += hist_g[k];
            HL += hist_h[k];
            const double GR = G - GL, HR = H - HL;
            if (HL < cfg.min_child_weight || HR < cfg.min_child_weight) continue;
            const double gain = 0.5 * (GL * GL / (HL + lambda) + GR * GR / (HR + lambda) - parent);
            if (gain > best.gain) best = {static_cast<int>(j), static_cast<std::uint16_t>(k), gain};
          }
        }
      }
      if (best.feature < 0) {
        tree.nodes[w.node].value = -G / (H + lambda) * cfg.learning_rate;
        continue;
      }
      const auto f = static_cast<std::size_t>(best.feature);
      std::vector<std::uint32_t> left, right;
      for (auto r : w.rows) (codes[f * n + r] <= best.bin ? left : right).push_back(r);
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      node_bin.push_back(0);
      node_bin.push_back(0);
      auto& node = tree.nodes[w.node];
      node.feature = best.feature;
      node.cut = model.cut_points[f][best.bin];
      node.left = l;
      node.right = l + 1;
      node.gain = best.gain;
      node_bin[w.node] = best.bin;
      total_gain[f] += best.gain;
      ++model.split_counts[f];
      queue.push_back({l, std::move(left), w.depth + 1});
      queue.push_back({l + 1, std::move(right), w.depth + 1});
    }
    for (std::size_t i = 0; i < n; ++i) {
      int k = 0;
      while (tree.nodes[k].feature >= 0)
        k = codes[tree.nodes[k].feature * n + i] <= node_bin[k] ? tree.nodes[k].left : tree.nodes[k].right;
      margin[i] += tree.nodes[k].value;
    }
    model.train_loss.push_back(mean_log_loss(margin, train.y));
    model.trees.push_back(std::move(tree));
  }

  model.feature_gain.assign(p, 0.0);
  model.feature_gain_average.assign(p, 0.0);
  double sum = 0.0, avg_sum = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    sum += total_gain[j];
    if (model.split_counts[j] > 0) avg_sum += total_gain[j] / static_cast<double>(model.split_counts[j]);
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (sum > 0) model.feature_gain[j] = total_gain[j] / sum;
    if (avg_sum > 0 && model.split_counts[j] > 0)
      model.feature_gain_average[j] = total_gain[j] / static_cast<double>(model.split_counts[j]) / avg_sum;
  }
  return model;
}

double predict_one(const GbmModel& model, std::span<const double> row) {
  if (row.size() != model.columns.size())
    throw Error(ErrorCode::shape, "row has " + std::to_string(row.size()) + " columns, model expects " +
                                      std::to_string(model.columns.size()));
  double m = model.base_score;
  for (const auto& t : model.trees) m += t.output(row);
  return sigmoid(m);
}

std::vector<double> predict(const GbmModel& model, const Dataset& data) {
  if (data.rows() > 0 && data.cols() != model.columns.size())
    throw Error(ErrorCode::shape, "matrix has " + std::to_string(data.cols()) + " columns, model expects " +
                                      std::to_string(model.columns.size()));
  std::vector<double> out(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) out[i] = predict_one(model, data.row(i));
  return out;
}

LogisticModel train_logistic(const Dataset& train, double l2) {
  if (!(l2 >= 0)) throw Error(ErrorCode::config, "l2 must be >= 0");
  require_two_classes(train);
  const std::size_t n = train.rows(), p = train.cols();
  LogisticModel m;
  m.columns = train.columns;
  m.l2 = l2;
  m.mean.assign(p, 0.0);
  m.sd.assign(p, 0.0);
  m.dropped.assign(p, false);
  m.coef.assign(p, 0.0);
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < p; ++j) {
    double lo = train.at(0, j), hi = lo, s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = train.at(i, j);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      s += v;
    }
    const double mu = s / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (train.at(i, j) - mu) * (train.at(i, j) - mu);
    m.mean[j] = mu;
    m.sd[j] = std::sqrt(ss / static_cast<double>(n));
    if (lo == hi || !(m.sd[j] > 0)) {
      m.dropped[j] = true;
      m.warnings.push_back("dropped zero-variance column " + train.columns[j]);
    } else {
      kept.push_back(j);
    }
  }
  const auto q = static_cast<Eigen::Index>(kept.size() + 1);
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), q);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    Z(r, 0) = 1.0;
    for (std::size_t k = 0; k < kept.size(); ++k)
      Z(r, static_cast<Eigen::Index>(k + 1)) = (train.at(i, kept[k]) - m.mean[kept[k]]) / m.sd[kept[k]];
    y(r) = train.y[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::VectorXd pen = Eigen::VectorXd::Constant(q, l2 * inv_n);
  pen(0) = 0.0;
  auto objective = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd z = Z * w;
    double s = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) s += softplus(z(i)) - y(i) * z(i);
    return s * inv_n + 0.5 * w.cwiseProduct(pen).dot(w);
  };
  Eigen::VectorXd w = Eigen::VectorXd::Zero(q);
  const double rate = train.positive_rate();
  w(0) = std::log(rate / (1.0 - rate));
  int it = 0;
  double gnorm = 0.0;
  for (; it < 500; ++it) {
    const Eigen::VectorXd z = Z * w;
    Eigen::VectorXd pr(z.size()), wt(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      pr(i) = 1.0 / (1.0 + std::exp(-z(i)));
      wt(i) = pr(i) * (1.0 - pr(i));
    }
    const Eigen::VectorXd grad = Z.transpose() * (pr - y) * inv_n + pen.cwiseProduct(w);
    gnorm = grad.norm();
    if (gnorm < 1e-8) break;
    Eigen::MatrixXd H = Z.transpose() * wt.asDiagonal() * Z * inv_n;
    H.diagonal() += pen;
    H.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = H.ldlt().solve(-grad);
    const double f0 = objective(w), slope = grad.dot(step);
    double t = 1.0;
    while (t > 1e-12 && objective(w + t * step) > f0 + 1e-4 * t * slope) t *= 0.5;
    w += t * step;
  }
  if (gnorm >= 1e-8) m.warnings.push_back("logistic fit stopped at 500 iterations, gradient norm " + text::fmt(gnorm));
  m.iterations = it;
  m.gradient_norm = gnorm;
  m.intercept = w(0);
  for (std::size_t k = 0; k < kept.size(); ++k) m.coef[kept[k]] = w(static_cast<Eigen::Index>(k + 1));
  return m;
}

std::vector<double> predict(const LogisticModel& model, const Dataset& data) {
  if (data.rows() > 0 && data.cols() != model.coef.size())
    throw Error(ErrorCode::shape, "matrix has " + std::to_string(data.cols()) + " columns, model expects " +
                                      std::to_string(model.coef.size()));
  std::vector<double> out(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    double z = model.intercept;
    for (std::size_t j = 0; j < model.coef.size(); ++j)
      if (!model.dropped[j]) z += model.coef[j] * (data.at(i, j) - model.mean[j]) / model.sd[j];
    out[i] = sigmoid(z);
  }
  return out;
}

TuningResult tscv_tune(const Dataset& train, std::span<const GbmConfig> grid, int k) {
  if (grid.empty()) throw Error(ErrorCode::tuning, "empty hyperparameter grid");
  if (k < 2) throw Error(ErrorCode::tuning, "time-series CV needs k >= 2");
  const std::size_t n = train.rows();
  const auto parts = static_cast<std::size_t>(k) + 1;
  if (n / parts < 1)
    throw Error(ErrorCode::tuning, std::to_string(k) + " folds need at least " + std::to_string(parts) + " rows, have " +
                                       std::to_string(n));
  struct Fold {
    Dataset fit, check;
  };
  std::vector<Fold> folds;
  for (std::size_t i = 1; i <= static_cast<std::size_t>(k); ++i) {
    const std::size_t a = n * i / parts, b = n * (i + 1) / parts;
    Fold f{train.slice(0, a), train.slice(a, b)};
    const double rf = f.fit.positive_rate(), rc = f.check.positive_rate();
    if (f.fit.rows() == 0 || f.check.rows() == 0 || rf == 0 || rf == 1 || rc == 0 || rc == 1) continue;
    folds.push_back(std::move(f));
  }
  if (folds.empty()) throw Error(ErrorCode::tuning, "every time-series fold is single-class");

  TuningResult result;
  for (const auto& cfg : grid) {
    TuningScore s{cfg, 0.0, 0};
    for (const auto& f : folds) {
      const auto model = train_gbm(f.fit, cfg);
      s.mean_auc += evaluate::auc(predict(model, f.check), f.check.y);
      ++s.folds_used;
    }
    s.mean_auc /= static_cast<double>(s.folds_used);
    result.scores.push_back(s);
  }
  const auto* best = &result.scores.front();
  for (const auto& s : result.scores) {
    const bool better = s.mean_auc > best->mean_auc ||
                        (s.mean_auc == best->mean_auc &&
                         std::tie(s.config.n_trees, s.config.max_depth) < std::tie(best->config.n_trees, best->config.max_depth));
    if (better) best = &s;
  }
  result.best = best->config;
  return result;
}

F1Ratio f1_at(std::span<const double> scores, std::span<const int> labels, double tau) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::shape, "scores and labels differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pos = scores[i] >= tau;
    if (pos && labels[i] == 1) ++tp;
    else if (pos) ++fp;
    else if (labels[i] == 1) ++fn;
  }
  return {2 * tp, 2 * tp + fp + fn};
}

double optimize_threshold(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::shape, "scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1;
  if (pos == 0) throw Error(ErrorCode::threshold, "threshold search needs at least one positive label");
  if (pos == labels.size()) throw Error(ErrorCode::threshold, "threshold search needs at least one negative label");
  double best_tau = 0.01;
  F1Ratio best{0, 1};
  for (int i = 1; i <= 99; ++i) {
    const double tau = static_cast<double>(i) / 100.0;
    const auto f = f1_at(scores, labels, tau);
    // f / f.den >= best / best.den, compared without rounding; >= lets the larger tau win ties.
    if (f.num * best.den >= best.num * f.den) {
      best = f;
      best_tau = tau;
    }
  }
  return best_tau;
}

nlohmann::json to_json(const GbmConfig& c) {
  return {{"n_trees", c.n_trees},   {"max_depth", c.max_depth},       {"learning_rate", c.learning_rate},
          {"min_child_weight", c.min_child_weight}, {"l2_reg", c.l2_reg}, {"subsample", c.subsample},
          {"n_bins", c.n_bins},     {"seed", c.seed}};
}

GbmConfig gbm_config_from_json(const nlohmann::json& j) {
  GbmConfig c;
  c.n_trees = j.at("n_trees").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.min_child_weight = j.at("min_child_weight").get<double>();
  c.l2_reg = j.at("l2_reg").get<double>();
  c.subsample = j.at("subsample").get<double>();
  c.n_bins = j.at("n_bins").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json to_json(const ModelArtifact& m) {
  using nlohmann::json;
  json trees = json::array();
  for (const auto& t : m.gbm.trees) {
    json nodes = json::array();
    for (const auto& nd : t.nodes) {
      if (nd.feature < 0)
        nodes.push_back({{"leaf", nd.value}});
      else
        nodes.push_back({{"feature", nd.feature}, {"cut", nd.cut}, {"left", nd.left}, {"right", nd.right}, {"gain", nd.gain}});
    }
    trees.push_back(nodes);
  }
  json j{{"format", "insider-signal-model"},
         {"version", ModelArtifact::kFormatVersion},
         {"columns", m.gbm.columns},
         {"split", {{"train_end", m.split.train_end.iso()}, {"valid_end", m.split.valid_end.iso()}, {"test_end", m.split.test_end.iso()}}},
         {"config", to_json(m.gbm.config)},
         {"base_score", m.gbm.base_score},
         {"threshold", m.threshold},
         {"threshold_optimized", m.threshold_optimized},
         {"trees", trees},
         {"cut_points", m.gbm.cut_points},
         {"feature_gain", m.gbm.feature_gain},
         {"feature_gain_average", m.gbm.feature_gain_average},
         {"split_counts", m.gbm.split_counts},
         {"train_loss", m.gbm.train_loss}};
  if (m.logistic) {
    const auto& l = *m.logistic;
    j["logistic_threshold"] = m.logistic_threshold;
    j["logistic"] = {{"columns", l.columns}, {"mean", l.mean},   {"sd", l.sd},
                     {"dropped", l.dropped}, {"coef", l.coef},   {"intercept", l.intercept},
                     {"l2", l.l2},           {"iterations", l.iterations}, {"gradient_norm", l.gradient_norm},
                     {"warnings", l.warnings}};
  }
  if (m.tuning) {
    json scores = json::array();
    for (const auto& s : m.tuning->scores)
      scores.push_back({{"config", to_json(s.config)}, {"mean_auc", s.mean_auc}, {"folds_used", s.folds_used}});
    j["tuning"] = {{"best", to_json(m.tuning->best)}, {"scores", scores}};
  }
  return j;
}

ModelArtifact model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "insider-signal-model")
      throw Error(ErrorCode::format, "not a model document");
    if (j.at("version").get<int>() != ModelArtifact::kFormatVersion)
      throw Error(ErrorCode::format, "unsupported model version " + j.at("version").dump());
    ModelArtifact m;
    m.gbm.columns = j.at("columns").get<std::vector<std::string>>();
    const auto& sp = j.at("split");
    m.split = {Date::parse(sp.at("train_end").get<std::string>()), Date::parse(sp.at("valid_end").get<std::string>()),
               Date::parse(sp.at("test_end").get<std::string>())};
    m.gbm.config = gbm_config_from_json(j.at("config"));
    m.gbm.base_score = j.at("base_score").get<double>();
    m.threshold = j.at("threshold").get<double>();
    m.threshold_optimized = j.at("threshold_optimized").get<bool>();
    const auto p = static_cast<int>(m.gbm.columns.size());
    for (const auto& tj : j.at("trees")) {
      Tree t;
      for (const auto& nj : tj) {
        TreeNode nd;
        if (nj.contains("leaf")) {
          nd.value = nj.at("leaf").get<double>();
        } else {
          nd.feature = nj.at("feature").get<int>();
          nd.cut = nj.at("cut").get<double>();
          nd.left = nj.at("left").get<int>();
          nd.right = nj.at("right").get<int>();
          nd.gain = nj.at("gain").get<double>();
        }
        t.nodes.push_back(nd);
      }
      const auto size = static_cast<int>(t.nodes.size());
      for (const auto& nd : t.nodes)
        if (nd.feature >= p || (nd.feature >= 0 && (nd.left <= 0 || nd.left >= size || nd.right <= 0 || nd.right >= size)))
          throw Error(ErrorCode::format, "tree node references outside the model");
      if (t.nodes.empty()) throw Error(ErrorCode::format, "empty tree");
      m.gbm.trees.push_back(std::move(t));
    }
    m.gbm.cut_points = j.at("cut_points").get<std::vector<std::vector<double>>>();
    m.gbm.feature_gain = j.at("feature_gain").get<std::vector<double>>();
    m.gbm.feature_gain_average = j.at("feature_gain_average").get<std::vector<double>>();
    m.gbm.split_counts = j.at("split_counts").get<std::vector<std::size_t>>();
    m.gbm.train_loss = j.at("train_loss").get<std::vector<double>>();
    if (j.contains("logistic")) {
      const auto& lj = j.at("logistic");
      LogisticModel l;
      l.columns = lj.at("columns").get<std::vector<std::string>>();
      l.mean = lj.at("mean").get<std::vector<double>>();
      l.sd = lj.at("sd").get<std::vector<double>>();
      l.dropped = lj.at("dropped").get<std::vector<bool>>();
      l.coef = lj.at("coef").get<std::vector<double>>();
      l.intercept = lj.at("intercept").get<double>();
      l.l2 = lj.at("l2").get<double>();
      l.iterations = lj.at("iterations").get<int>();
      l.gradient_norm = lj.at("gradient_norm").get<double>();
      l.warnings = lj.at("warnings").get<std::vector<std::string>>();
      m.logistic = std::move(l);
      m.logistic_threshold = j.value("logistic_threshold", 0.5);
    }
    if (j.contains("tuning")) {
      TuningResult t;
      t.best = gbm_config_from_json(j.at("tuning").at("best"));
      for (const auto& s : j.at("tuning").at("scores"))
        t.scores.push_back({gbm_config_from_json(s.at("config")), s.at("mean_auc").get<double>(),
                            s.at("folds_used").get<std::size_t>()});
      m.tuning = std::move(t);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format, std::string("malformed model document: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ModelArtifact& m) {
  text::write_file(path, to_json(m).dump(1) + '\n');
}

ModelArtifact load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(nlohmann::json::parse(text::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::format, path.string() + ": " + e.what());
  }
}

}  // namespace insider::learn
