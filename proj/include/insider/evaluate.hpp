#pragma once

#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace insider::learn {
struct GbmModel;
}

namespace insider::evaluate {

/// Mann-Whitney AUC with ties counted one half.
double auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// One point per distinct score (descending), starting at (0, 0) and ending at (1, 1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(std::span<const RocPoint> roc);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  [[nodiscard]] std::size_t n() const { return tp + fp + tn + fn; }
};

struct ClassificationMetrics {
  double threshold = 0.5;
  Confusion confusion;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when nothing is predicted positive; precision is then reported as 0.
  bool precision_undefined = false;
};

/// Predicted positive iff score >= tau.
ClassificationMetrics classify_and_count(std::span<const double> scores, std::span<const int> labels, double tau);

struct CalibrationBin {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_predicted;
  std::optional<double> actual_rate;
};

/// Equal-width bins over [0, 1]; the last bin is closed at 1.
std::vector<CalibrationBin> calibration(std::span<const double> scores, std::span<const int> labels,
                                        std::size_t n_bins = 10);

struct HistogramBin {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
};
std::vector<HistogramBin> score_histogram(std::span<const double> scores, std::size_t n_bins = 20);

struct ImportanceEntry {
  std::size_t rank = 0;
  std::string feature;
  std::size_t column = 0;
  double importance = 0.0;     // share of total gain
  double average_gain = 0.0;   // share of mean gain per split
  std::size_t splits = 0;
};

struct ImportanceReport {
  std::vector<ImportanceEntry> ranking;
  std::vector<std::string> warnings;
};

/// Columns with any split, by descending total-gain share; ties keep column order.
ImportanceReport importance_report(const learn::GbmModel& model);

struct EvaluationReport {
  std::size_t n = 0;
  std::optional<double> auc;
  ClassificationMetrics metrics;
  std::vector<RocPoint> roc_points;
  std::vector<CalibrationBin> calibration_bins;
  std::vector<HistogramBin> score_histogram;
};

EvaluationReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double tau);

nlohmann::json to_json(const EvaluationReport& r);
nlohmann::json to_json(const ImportanceReport& r);

/// `<prefix>_roc`, `<prefix>_calibration`, `<prefix>_scores` as CSV and SVG pairs.
void write_plots(const std::filesystem::path& dir, const std::string& prefix, const EvaluationReport& r);
void write_importance_plot(const std::filesystem::path& dir, const ImportanceReport& r);

}  // namespace insider::evaluate
