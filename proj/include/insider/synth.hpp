#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "insider/date.hpp"

namespace insider::synth {

struct Planted {
  double w_52w_high = -1.6;
  double w_price_dev = 0.5;
  /// Weight on the product of the two scores; invisible to a linear model.
  double w_interaction = 0.8;
  double base_rate = 0.27;
  double noise_sd = 0.3;
};

struct SynthConfig {
  std::size_t n_issuers = 0;  // 0: sized from n_events
  std::size_t n_events = 10000;
  std::uint64_t seed = 7;
  Date start{2018, 1, 1};  // disclosure date range
  Date end{2024, 12, 31};
  Planted planted;
  std::vector<double> bucket_effect{0.023, 0.047, 0.044, 0.048, 0.063};
  std::vector<double> bucket_weights{0.35, 0.20, 0.15, 0.15, 0.15};
  /// When false every bucket is planted at the mean of bucket_effect.
  bool momentum = true;
  /// Cumulative abnormal drift at day 20 and day 60 relative to day 30.
  double drift_day20 = 1.10;
  double drift_day60 = 0.70;
  double noise_document_share = 0.15;
  double biotech_share = 0.20;

  void validate() const;
};

/// Reads the `[synth]` section.
SynthConfig load_config(const std::filesystem::path& path);

struct TruthEvent {
  std::string event_key;
  std::string ticker;
  std::size_t bucket = 0;
  double price_deviation = 0.0;
  double pct_from_52w_high = 0.0;
  double z_52w_high = 0.0;
  double z_price_dev = 0.0;
  double intended_p = 0.0;
  int label = 0;
  double car_20 = 0.0;
  double car_30 = 0.0;
  double car_60 = 0.0;
};

struct GroundTruth {
  SynthConfig config;
  std::size_t n_issuers = 0;
  std::size_t n_documents = 0;
  std::size_t n_noise_documents = 0;
  Date bars_start, bars_end;
  std::vector<TruthEvent> events;  // sorted by event_key
};

/// Writes filings/, cusip_map.csv, bars.csv, factors.csv, sectors.csv,
/// regime.csv, truth.jsonl, truth_summary.json and pipeline.ini under `out`.
GroundTruth generate(const SynthConfig& cfg, const std::filesystem::path& out);

/// Planted parameters with realized label rate and per-bucket CAR moments.
nlohmann::json describe(const GroundTruth& truth);

GroundTruth read_truth(const std::filesystem::path& dir);

}  // namespace insider::synth
