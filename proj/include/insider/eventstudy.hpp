#pragma once

#include <compare>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "insider/date.hpp"
#include "insider/filings.hpp"
#include "insider/marketdata.hpp"

namespace insider::eventstudy {

/// Three-factor OLS coefficients from the estimation window, with standard errors.
struct FactorLoadings {
  double alpha = 0.0;
  double beta_mkt = 0.0;
  double beta_smb = 0.0;
  double beta_hml = 0.0;
  int n_obs = 0;
  Date estimation_end;
  double se_alpha = 0.0;
  double se_mkt = 0.0;
  double se_smb = 0.0;
  double se_hml = 0.0;
  double residual_sd = 0.0;
};

struct LabelConfig {
  int horizon = 30;
  double car_threshold = 0.10;
  int estimation_window = 252;
  int min_obs = 126;
  /// CAR as compounded realized minus compounded expected return instead of the AR sum.
  bool compound = false;
  bool strict = false;

  void validate() const;
};

struct EventKey {
  std::string issuer_id;
  std::string insider_id;
  Date disclosure_date;

  auto operator<=>(const EventKey&) const = default;
  bool operator==(const EventKey&) const = default;
  /// `issuer|insider|YYYY-MM-DD`
  [[nodiscard]] std::string str() const;
  static EventKey parse(std::string_view s);
};

/// Same-day purchases by one insider in one issuer, disclosed together.
struct Event {
  EventKey key;
  std::string ticker;
  std::string cusip;
  std::string insider_title_raw;
  Date transaction_date;  // earliest trade in the group
  double shares = 0.0;
  double price_per_share = 0.0;  // value-weighted
  double transaction_value = 0.0;
  std::vector<std::string> accession_ids;
};

struct EventOutcome {
  EventKey key;
  FactorLoadings loadings;
  std::vector<double> ar_series;
  double car = 0.0;
  int label = 0;
  int horizon = 0;
  Date window_start;
  Date window_end;
};

struct LabeledEvent {
  Event event;
  std::optional<EventOutcome> outcome;
  std::string skip_reason;
};

/// Groups purchase records into events keyed by (issuer, insider, disclosure date), sorted by key.
std::vector<Event> aggregate_events(std::span<const filings::InsiderTransaction> kept);

/// OLS of (R_t - R_f) on [1, MKT-RF, SMB, HML] over the `window` trading days
/// ending at the last trading date <= estimation_end. Identically-zero factor
/// columns are dropped (their beta is 0); any other rank deficiency throws.
FactorLoadings fit_ff3(const market::MarketView& market, std::string_view ticker, Date estimation_end, int window,
                       int min_obs);

/// AR_t = R_t - alpha - b_mkt (MKT_t - RF_t) - b_smb SMB_t - b_hml HML_t for the
/// `horizon` trading days starting at window_start.
std::vector<double> abnormal_returns(const market::MarketView& market, std::string_view ticker,
                                     const FactorLoadings& loadings, Date window_start, int horizon);

/// Estimation ends at the last trading date <= disclosure; the outcome window
/// covers the `horizon` trading dates after disclosure.
EventOutcome label_event(const Event& event, const market::MarketView& market, const LabelConfig& cfg);

/// Labels every event; failures become skips unless cfg.strict.
std::vector<LabeledEvent> label_events(std::span<const Event> events, const market::MarketView& market,
                                       const LabelConfig& cfg, unsigned jobs = 1);

double sum_car(std::span<const double> ar);

nlohmann::json to_json(const LabeledEvent& e);
LabeledEvent labeled_event_from_json(const nlohmann::json& j);
void write_events_jsonl(const std::filesystem::path& path, std::span<const LabeledEvent> events);
std::vector<LabeledEvent> read_events_jsonl(const std::filesystem::path& path);

}  // namespace insider::eventstudy
