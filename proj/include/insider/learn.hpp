#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "insider/date.hpp"

namespace insider::features {
struct FeatureMatrix;
}

namespace insider::learn {

/// Row-major design matrix with labels and the dates used for temporal partitioning.
struct Dataset {
  std::vector<std::string> columns;
  std::vector<double> x;
  std::vector<int> y;
  std::vector<Date> dates;
  std::vector<std::string> ids;

  [[nodiscard]] std::size_t rows() const { return y.size(); }
  [[nodiscard]] std::size_t cols() const { return columns.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t i) const { return {x.data() + i * cols(), cols()}; }
  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return x[i * cols() + j]; }

  void push(std::span<const double> r, int label, Date date = {}, std::string id = {});
  [[nodiscard]] Dataset slice(std::size_t begin, std::size_t end) const;
  [[nodiscard]] Dataset select(std::span<const std::size_t> idx) const;
  [[nodiscard]] double positive_rate() const;
};

Dataset from_features(const features::FeatureMatrix& m);

struct SplitSpec {
  Date train_end{2022, 12, 31};
  Date valid_end{2023, 12, 31};
  Date test_end{2024, 12, 31};
  void validate() const;
};

struct Split {
  Dataset train, valid, test;
};

/// Partition by date: <= train_end, <= valid_end, <= test_end; later rows are dropped.
Split temporal_split(const Dataset& data, const SplitSpec& spec);

struct GbmConfig {
  int n_trees = 200;
  int max_depth = 4;
  double learning_rate = 0.1;
  double min_child_weight = 5.0;
  double l2_reg = 1.0;
  double subsample = 1.0;
  int n_bins = 64;
  std::uint64_t seed = 42;
  void validate() const;
  bool operator==(const GbmConfig&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double cut = 0.0;  // rows with x <= cut go left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output in log-odds, learning rate applied
  double gain = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  [[nodiscard]] double output(std::span<const double> row) const;
};

struct GbmModel {
  GbmConfig config;
  std::vector<std::string> columns;
  double base_score = 0.0;
  std::vector<Tree> trees;
  std::vector<std::vector<double>> cut_points;
  /// Total split gain per column, normalized to sum 1 (all zero for a base-only model).
  std::vector<double> feature_gain;
  /// Mean gain per split per column, normalized the same way.
  std::vector<double> feature_gain_average;
  std::vector<std::size_t> split_counts;
  /// Mean training log loss after each round; entry 0 is the base-only loss.
  std::vector<double> train_loss;
};

GbmModel train_gbm(const Dataset& train, const GbmConfig& cfg);
double predict_one(const GbmModel& model, std::span<const double> row);
std::vector<double> predict(const GbmModel& model, const Dataset& data);

struct LogisticModel {
  std::vector<std::string> columns;
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<bool> dropped;
  std::vector<double> coef;  // per column, on the standardized scale; 0 when dropped
  double intercept = 0.0;
  double l2 = 1.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<std::string> warnings;
};

/// Newton iterations on (1/n) * (sum log loss + l2/2 |w|^2) until the gradient norm is below 1e-8.
LogisticModel train_logistic(const Dataset& train, double l2 = 1.0);
std::vector<double> predict(const LogisticModel& model, const Dataset& data);

struct TuningScore {
  GbmConfig config;
  double mean_auc = 0.0;
  std::size_t folds_used = 0;
};

struct TuningResult {
  GbmConfig best;
  std::vector<TuningScore> scores;
};

/// Expanding-window folds over date-sorted rows; fold i trains on the first i/(k+1) and validates on the next slice.
TuningResult tscv_tune(const Dataset& train, std::span<const GbmConfig> grid, int k);

/// F1 with predicted positive iff score >= tau, as the exact ratio 2tp / (2tp + fp + fn).
struct F1Ratio {
  std::size_t num = 0;
  std::size_t den = 0;
  [[nodiscard]] double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
};
F1Ratio f1_at(std::span<const double> scores, std::span<const int> labels, double tau);

/// Grid tau = 0.01 ... 0.99 maximizing F1; ties resolve to the largest tau.
double optimize_threshold(std::span<const double> scores, std::span<const int> labels);

struct ModelArtifact {
  static constexpr int kFormatVersion = 1;
  GbmModel gbm;
  std::optional<LogisticModel> logistic;
  double threshold = 0.5;
  /// Chosen on the same validation rows as `threshold`, for the baseline.
  double logistic_threshold = 0.5;
  bool threshold_optimized = false;
  SplitSpec split;
  std::optional<TuningResult> tuning;
};

nlohmann::json to_json(const GbmConfig& c);
GbmConfig gbm_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelArtifact& m);
ModelArtifact model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const ModelArtifact& m);
ModelArtifact load_model(const std::filesystem::path& path);

}  // namespace insider::learn
