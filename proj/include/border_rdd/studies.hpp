#pragma once

#include "border_rdd/geometry.hpp"
#include "border_rdd/outcomes.hpp"
#include "border_rdd/rdd.hpp"

#include <array>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace border_rdd {

//! Per-cell outcome of one estimate in a battery. Failures are data.
enum class RunStatus
{
  ok,
  insufficient_obs,
  multicollinearity,
  bandwidth_failure,
  error
};

std::string status_name(RunStatus status);

struct RunResult
{
  std::string outcome;
  std::string border_id; //!< "pooled" for pooled estimates
  int p = 1;
  RunStatus status = RunStatus::ok;
  std::string message; //!< error text when status != ok
  RddEstimate estimate;
};

//! Runs one estimate and converts library errors into a status.
RunResult run_spec(const CellTable& table, const RddSpec& spec, const std::string& border_id);

extern const std::vector<std::string> kResultColumns;
extern const std::vector<std::string> kPooledColumns;

//! Rows in the input order; estimate fields are blank for failed runs.
std::string format_results(const std::vector<RunResult>& results);
//! Results plus a kernel column, for the pooled tables.
std::string format_pooled(const std::vector<RunResult>& results);

//! The cell-level controls used when a specification includes covariates.
extern const std::vector<std::string> kDefaultCovariates;

//! Each covariate as outcome, per border, linear and quadratic, no
//! covariate adjustment. Order: covariate, border, p.
std::vector<RunResult> balance_battery(const CellTable& table, const std::vector<std::string>& covariates,
                                       const RddSpec& base);

//! {luminosity, lum_pp, lit} x {linear, quadratic} on the pooled table with
//! dialect fixed effects, optionally with `covariates` as controls.
std::vector<RunResult> pooled_dialect_fe(const CellTable& table, const RddSpec& base,
                                         const std::vector<std::string>& covariates = {});

struct RankGapSummary
{
  std::vector<BorderPolyline> retained;
  std::size_t total = 0;
  double mean_gap = 0.0;
  double sd_gap = 0.0; //!< sample standard deviation over all borders
};

RankGapSummary rank_gap_filter(const std::vector<BorderPolyline>& borders, int threshold = 7);

//! Per border: {luminosity, lit} x {linear, quadratic} with covariates.
//! Order: outcome, p, border (as in the per-outcome tables).
std::vector<RunResult> per_border_battery(const std::map<std::string, CellTable>& tables,
                                          const std::vector<std::string>& border_ids, const RddSpec& base,
                                          const std::vector<std::string>& covariates = kDefaultCovariates);

// Governance evidence -------------------------------------------------------

constexpr std::size_t kSurveyMeasures = 5;

struct City
{
  std::string city_id;
  std::string province;
  LonLat location;
  std::array<double, kSurveyMeasures> measures{};
};

std::vector<City> load_cities(const std::string& path);

struct CityDyad
{
  std::string city_a; //!< lexicographically smaller id
  std::string city_b;
  bool same_province = false;
  double distance_km = 0.0;
  std::array<double, kSurveyMeasures> abs_diffs{};
};

struct DyadSummary
{
  std::vector<CityDyad> dyads; //!< sorted by (city_a, city_b)
  std::array<double, kSurveyMeasures> within_mean{};
  std::array<double, kSurveyMeasures> across_mean{};
  std::size_t n_within = 0;
  std::size_t n_across = 0;
  std::vector<std::string> excluded; //!< cities without any qualifying neighbour
};

using ProvincePairs = std::set<std::pair<std::string, std::string>>;

//! Unordered province adjacency from border metadata.
ProvincePairs province_adjacency(const std::vector<BorderPolyline>& borders);

DyadSummary dyad_differences(const std::vector<City>& cities, const ProvincePairs& adjacency,
                             double limit_km = 150.0);

std::string format_dyads(const DyadSummary& summary);
std::string format_dyad_summary(const DyadSummary& summary);

struct Prefecture
{
  std::string prefecture_id;
  std::string province;
  std::vector<std::string> borders; //!< border ids the prefecture touches
  double employed_private = 0.0;
  double employed_total = 0.0;
  bool autonomous = false;
};

std::vector<Prefecture> load_prefectures(const std::string& path);

struct PrefecturePair
{
  std::string border_id;
  double pct_private_high = 0.0;
  double pct_private_low = 0.0;
  int rank_diff = 0;
  double diff = 0.0; //!< high minus low
};

struct LinearFit
{
  std::size_t n = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double se_slope = 0.0; //!< HC1 for percent private, classical for rank-GDP
  double p_value = 1.0;
};

struct PrivateSummary
{
  std::vector<PrefecturePair> pairs;
  LinearFit fit;
  std::vector<std::string> dropped; //!< "border_id: reason"
};

//! Sides are oriented so that rank_diff > 0 whatever the labels say.
PrivateSummary percent_private_analysis(const std::vector<Prefecture>& prefectures,
                                        const std::vector<BorderPolyline>& borders);

std::string format_private_pairs(const PrivateSummary& summary);
std::string format_private_summary(const PrivateSummary& summary);

struct ProvinceRank
{
  std::string province;
  int rank = 0;
  std::optional<double> gdp_pc;
};

std::vector<ProvinceRank> load_province_ranks(const std::string& path);

LinearFit rank_gdp_regression(const std::vector<ProvinceRank>& provinces);

std::string format_rank_gdp(const LinearFit& fit);

//! OLS of y on x with an intercept. `robust` selects HC1 with a t(n-2)
//! reference, otherwise the classical standard error.
LinearFit simple_ols(const std::vector<double>& x, const std::vector<double>& y, bool robust);

// Plot data -----------------------------------------------------------------

struct PlotSeries
{
  std::string scope; //!< border id or "pooled"
  std::string outcome;
  RdPlotData data;
};

std::string format_plot_bins(const std::vector<PlotSeries>& series);
//! One row per (series, side, order) with coefficients c0..c4, blank past the order.
std::string format_plot_fits(const std::vector<PlotSeries>& series);

} // namespace border_rdd
