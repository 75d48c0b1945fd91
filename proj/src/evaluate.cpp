#include "insider/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numeric>

#include "insider/error.hpp"
#include "insider/learn.hpp"
#include "insider/text.hpp"

namespace insider::evaluate {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::shape, "scores and labels differ in length");
  for (int l : labels)
    if (l != 0 && l != 1) throw Error(ErrorCode::validation, "labels must be 0 or 1");
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1;
  return {pos, labels.size() - pos};
}

std::vector<std::size_t> order_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [P, N] = class_counts(labels);
  if (P == 0 || N == 0) throw Error(ErrorCode::metric, "AUC needs both classes");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the positive rank sum stays an integer under midranks.
  unsigned long long twice_rank_sum = 0;
  for (std::size_t a = 0; a < idx.size();) {
    std::size_t b = a;
    while (b + 1 < idx.size() && scores[idx[b + 1]] == scores[idx[a]]) ++b;
    std::size_t pos = 0;
    for (std::size_t k = a; k <= b; ++k) pos += labels[idx[k]] == 1;
    twice_rank_sum += static_cast<unsigned long long>(pos) * ((a + 1) + (b + 1));
    a = b + 1;
  }
  const unsigned long long u2 = twice_rank_sum - static_cast<unsigned long long>(P) * (P + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [P, N] = class_counts(labels);
  if (P == 0 || N == 0) throw Error(ErrorCode::metric, "ROC needs both classes");
  const auto idx = order_desc(scores);
  std::vector<RocPoint> out{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t a = 0; a < idx.size();) {
    std::size_t b = a;
    while (b < idx.size() && scores[idx[b]] == scores[idx[a]]) {
      (labels[idx[b]] == 1 ? tp : fp)++;
      ++b;
    }
    out.push_back({static_cast<double>(fp) / static_cast<double>(N), static_cast<double>(tp) / static_cast<double>(P)});
    a = b;
  }
  return out;
}

double trapezoid_area(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  return area;
}

ClassificationMetrics classify_and_count(std::span<const double> scores, std::span<const int> labels, double tau) {
  check_inputs(scores, labels);
  ClassificationMetrics m;
  m.threshold = tau;
  auto& c = m.confusion;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= tau;
    if (pred) (labels[i] == 1 ? c.tp : c.fp)++;
    else (labels[i] == 1 ? c.fn : c.tn)++;
  }
  if (c.tp + c.fp > 0)
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  else
    m.precision_undefined = true;
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const std::size_t den = 2 * c.tp + c.fp + c.fn;
  if (den > 0) m.f1 = static_cast<double>(2 * c.tp) / static_cast<double>(den);
  return m;
}

namespace {
std::size_t unit_bin(double s, std::size_t n_bins) {
  const double pos = s * static_cast<double>(n_bins);
  if (!(pos > 0)) return 0;
  return std::min(static_cast<std::size_t>(pos), n_bins - 1);
}
}  // namespace

std::vector<CalibrationBin> calibration(std::span<const double> scores, std::span<const int> labels,
                                        std::size_t n_bins) {
  check_inputs(scores, labels);
  if (n_bins < 2) throw Error(ErrorCode::range, "calibration needs at least two bins");
  std::vector<CalibrationBin> bins(n_bins);
  std::vector<double> sum(n_bins, 0.0);
  std::vector<std::size_t> pos(n_bins, 0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lo = static_cast<double>(b) / static_cast<double>(n_bins);
    bins[b].hi = static_cast<double>(b + 1) / static_cast<double>(n_bins);
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto b = unit_bin(scores[i], n_bins);
    ++bins[b].count;
    sum[b] += scores[i];
    pos[b] += labels[i] == 1;
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (bins[b].count == 0) continue;
    const auto n = static_cast<double>(bins[b].count);
    bins[b].mean_predicted = sum[b] / n;
    bins[b].actual_rate = static_cast<double>(pos[b]) / n;
  }
  return bins;
}

std::vector<HistogramBin> score_histogram(std::span<const double> scores, std::size_t n_bins) {
  if (n_bins < 1) throw Error(ErrorCode::range, "histogram needs at least one bin");
  std::vector<HistogramBin> bins(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lo = static_cast<double>(b) / static_cast<double>(n_bins);
    bins[b].hi = static_cast<double>(b + 1) / static_cast<double>(n_bins);
  }
  for (double s : scores) ++bins[unit_bin(s, n_bins)].count;
  return bins;
}

ImportanceReport importance_report(const learn::GbmModel& model) {
  ImportanceReport r;
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < model.feature_gain.size(); ++j)
    if (j < model.split_counts.size() && model.split_counts[j] > 0) cols.push_back(j);
  if (cols.empty()) {
    r.warnings.push_back("model has no splits; importance ranking is empty");
    return r;
  }
  std::stable_sort(cols.begin(), cols.end(),
                   [&](std::size_t a, std::size_t b) { return model.feature_gain[a] > model.feature_gain[b]; });
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto j = cols[k];
    r.ranking.push_back({k + 1, j < model.columns.size() ? model.columns[j] : "col" + std::to_string(j), j,
                         model.feature_gain[j],
                         j < model.feature_gain_average.size() ? model.feature_gain_average[j] : 0.0,
                         model.split_counts[j]});
  }
  return r;
}

EvaluationReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double tau) {
  check_inputs(scores, labels);
  EvaluationReport r;
  r.n = scores.size();
  const auto [P, N] = class_counts(labels);
  if (P > 0 && N > 0) {
    r.auc = auc(scores, labels);
    r.roc_points = roc_curve(scores, labels);
  }
  r.metrics = classify_and_count(scores, labels, tau);
  r.calibration_bins = calibration(scores, labels, 10);
  r.score_histogram = score_histogram(scores, 20);
  return r;
}

nlohmann::json to_json(const EvaluationReport& r) {
  using nlohmann::json;
  auto o = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json roc = json::array();
  for (const auto& p : r.roc_points) roc.push_back({p.fpr, p.tpr});
  json cal = json::array();
  for (const auto& b : r.calibration_bins)
    cal.push_back({{"bin_lo", b.lo}, {"bin_hi", b.hi}, {"mean_predicted", o(b.mean_predicted)},
                   {"actual_rate", o(b.actual_rate)}, {"count", b.count}});
  json hist = json::array();
  for (const auto& b : r.score_histogram) hist.push_back({{"bin_lo", b.lo}, {"bin_hi", b.hi}, {"count", b.count}});
  const auto& c = r.metrics.confusion;
  return {{"n", r.n},
          {"auc", o(r.auc)},
          {"threshold", r.metrics.threshold},
          {"precision", r.metrics.precision},
          {"precision_undefined", r.metrics.precision_undefined},
          {"recall", r.metrics.recall},
          {"f1", r.metrics.f1},
          {"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}},
          {"roc_points", roc},
          {"calibration_bins", cal},
          {"score_histogram", hist}};
}

nlohmann::json to_json(const ImportanceReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : r.ranking)
    rows.push_back({{"rank", e.rank}, {"feature", e.feature}, {"importance", e.importance},
                    {"average_gain_share", e.average_gain}, {"splits", e.splits}});
  return {{"ranking", rows}, {"warnings", r.warnings}};
}

namespace {

constexpr double kW = 360, kH = 300, kPad = 40;

std::string sx(double v) { return text::fixed(kPad + v * (kW - 2 * kPad), 2); }
std::string sy(double v) { return text::fixed(kH - kPad - v * (kH - 2 * kPad), 2); }

std::string svg_frame(const std::string& title, const std::string& body) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + text::fixed(kW, 0) + "\" height=\"" +
                  text::fixed(kH, 0) + "\">\n";
  s += "<rect x=\"" + sx(0) + "\" y=\"" + sy(1) + "\" width=\"" + text::fixed(kW - 2 * kPad, 2) + "\" height=\"" +
       text::fixed(kH - 2 * kPad, 2) + "\" fill=\"none\" stroke=\"#999\"/>\n";
  s += "<text x=\"" + sx(0) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" + title + "</text>\n";
  return s + body + "</svg>\n";
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const std::string& colour) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : pts) s += sx(x) + ',' + sy(y) + ' ';
  return s + "\"/>\n";
}

}  // namespace

void write_plots(const std::filesystem::path& dir, const std::string& prefix, const EvaluationReport& r) {
  {
    std::string csv = "fpr,tpr\n";
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : r.roc_points) {
      csv += text::fmt(p.fpr) + ',' + text::fmt(p.tpr) + '\n';
      pts.emplace_back(p.fpr, p.tpr);
    }
    text::write_file(dir / (prefix + "_roc.csv"), csv);
    text::write_file(dir / (prefix + "_roc.svg"),
                     svg_frame("ROC (AUC " + (r.auc ? text::fixed(*r.auc, 3) : std::string("n/a")) + ")",
                               polyline({{0, 0}, {1, 1}}, "#bbb") + polyline(pts, "#1f77b4")));
  }
  {
    std::string csv = "bin_lo,bin_hi,mean_predicted,actual_rate,count\n";
    std::vector<std::pair<double, double>> pts;
    for (const auto& b : r.calibration_bins) {
      csv += text::fmt(b.lo) + ',' + text::fmt(b.hi) + ',' + (b.mean_predicted ? text::fmt(*b.mean_predicted) : "") +
             ',' + (b.actual_rate ? text::fmt(*b.actual_rate) : "") + ',' + std::to_string(b.count) + '\n';
      if (b.mean_predicted) pts.emplace_back(*b.mean_predicted, *b.actual_rate);
    }
    text::write_file(dir / (prefix + "_calibration.csv"), csv);
    text::write_file(dir / (prefix + "_calibration.svg"),
                     svg_frame("Calibration", polyline({{0, 0}, {1, 1}}, "#bbb") + polyline(pts, "#d62728")));
  }
  {
    std::string csv = "bin_lo,bin_hi,count\n";
    std::size_t peak = 1;
    for (const auto& b : r.score_histogram) peak = std::max(peak, b.count);
    std::string bars;
    for (const auto& b : r.score_histogram) {
      csv += text::fmt(b.lo) + ',' + text::fmt(b.hi) + ',' + std::to_string(b.count) + '\n';
      const double h = static_cast<double>(b.count) / static_cast<double>(peak);
      bars += "<rect x=\"" + sx(b.lo) + "\" y=\"" + sy(h) + "\" width=\"" + text::fixed((b.hi - b.lo) * (kW - 2 * kPad), 2) +
              "\" height=\"" + text::fixed(h * (kH - 2 * kPad), 2) + "\" fill=\"#2ca02c\" stroke=\"#fff\"/>\n";
    }
    text::write_file(dir / (prefix + "_scores.csv"), csv);
    text::write_file(dir / (prefix + "_scores.svg"), svg_frame("Predicted probability", bars));
  }
}

void write_importance_plot(const std::filesystem::path& dir, const ImportanceReport& r) {
  std::string csv = "rank,feature,importance,average_gain_share,splits\n";
  std::string bars;
  const double row_h = (kH - 2 * kPad) / std::max<double>(1, static_cast<double>(r.ranking.size()));
  for (std::size_t k = 0; k < r.ranking.size(); ++k) {
    const auto& e = r.ranking[k];
    csv += std::to_string(e.rank) + ',' + e.feature + ',' + text::fmt(e.importance) + ',' + text::fmt(e.average_gain) +
           ',' + std::to_string(e.splits) + '\n';
    const double y = kPad + row_h * static_cast<double>(k);
    bars += "<rect x=\"" + sx(0) + "\" y=\"" + text::fixed(y, 2) + "\" width=\"" +
            text::fixed(e.importance * (kW - 2 * kPad), 2) + "\" height=\"" + text::fixed(row_h * 0.8, 2) +
            "\" fill=\"#9467bd\"/>\n<text x=\"" + sx(0) + "\" y=\"" + text::fixed(y + row_h * 0.6, 2) +
            "\" font-family=\"sans-serif\" font-size=\"9\">" + e.feature + "</text>\n";
  }
  text::write_file(dir / "importance.csv", csv);
  text::write_file(dir / "importance.svg", svg_frame("Feature importance (gain share)", bars));
}

}  // namespace insider::evaluate
