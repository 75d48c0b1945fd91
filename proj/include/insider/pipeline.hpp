#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "insider/config.hpp"
#include "insider/eventstudy.hpp"
#include "insider/features.hpp"
#include "insider/filings.hpp"
#include "insider/learn.hpp"
#include "insider/strata.hpp"

namespace insider::pipeline {

struct Paths {
  std::string filings;  // directory or http:// source
  std::filesystem::path cusip_map;
  std::filesystem::path bars;
  std::filesystem::path factors;
  std::filesystem::path sectors;
  std::filesystem::path regime;  // optional
  std::filesystem::path output;
};

struct PipelineConfig {
  Paths paths;
  filings::FilterConfig filters;
  eventstudy::LabelConfig label;
  features::FeatureConfig features;
  learn::SplitSpec split;
  std::vector<learn::GbmConfig> grid;
  int tuning_folds = 3;
  double logistic_l2 = 1.0;
  std::vector<int> horizons{20, 30, 60};
  double regime_threshold = 20.0;
  strata::BucketSpec buckets;
  bool strict = false;
  bool percent_factors = false;
  bool audit_reads = true;
  unsigned jobs = 1;
  std::uint64_t seed = 42;

  /// Checks settings and that every referenced input exists.
  void validate() const;
};

filings::FilterConfig filter_config(const config::Ini& ini);
eventstudy::LabelConfig label_config(const config::Ini& ini);
features::FeatureConfig feature_config(const config::Ini& ini);
learn::SplitSpec split_spec(const config::Ini& ini);
/// Cartesian product of the comma lists in `[gbm]`, in a fixed nesting order.
std::vector<learn::GbmConfig> gbm_grid(const config::Ini& ini, std::uint64_t seed);
strata::BucketSpec bucket_spec(const config::Ini& ini);

PipelineConfig config_from_ini(const config::Ini& ini);
PipelineConfig load_config(const std::filesystem::path& path);

struct ParseOutput {
  std::size_t documents = 0;
  std::vector<filings::InsiderTransaction> parsed;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::string>> failed;  // document, error
  std::string digest;  // over document names and contents
};

/// Parses every document from a directory or remote source; failures are
/// collected per document unless `strict`.
ParseOutput parse_documents(const std::string& source, bool strict, unsigned jobs,
                            const std::filesystem::path& cache_dir = {});

/// Writes `manifest.json` into `dir`: input digests, digests of every file in
/// `dir`, row counts, seed and parameters. No timestamps.
void write_manifest(const std::filesystem::path& dir, const std::string& stage,
                    const std::vector<std::pair<std::string, std::string>>& input_digests, const nlohmann::json& counts,
                    std::uint64_t seed, const nlohmann::json& params);

/// Digest of a file, or of a directory's files by name.
std::string digest_path(const std::filesystem::path& p);

struct RunSummary {
  std::filesystem::path output;
  std::size_t events = 0;
  std::size_t feature_rows = 0;
  std::optional<double> gbm_test_auc;
  std::optional<double> logistic_test_auc;
  double threshold = 0.5;
  std::size_t lookahead_reads = 0;
  std::size_t lookahead_violations = 0;
};

/// parse -> ingest -> label -> features -> train -> tune-threshold -> evaluate -> stratify, then report.md.
RunSummary run_all(const PipelineConfig& cfg);

/// Markdown summary assembled from a run directory's stage artifacts.
std::string render_report(const std::filesystem::path& run_dir);

}  // namespace insider::pipeline
