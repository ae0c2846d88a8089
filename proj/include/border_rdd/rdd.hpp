#pragma once

#include "border_rdd/outcomes.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace border_rdd {

using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class VarianceKind
{
  nn,     //!< nearest-neighbour residual variances
  cluster //!< cluster-robust sandwich
};

//! Configuration of one local-polynomial discontinuity estimate. The kernel
//! is always triangular.
struct RddSpec
{
  std::string outcome = "luminosity";
  int p = 1;
  std::optional<double> manual_h; //!< unset: data-driven bandwidth
  std::vector<std::string> covariates;
  std::optional<std::string> fixed_effect;
  VarianceKind variance = VarianceKind::nn;
  int nn_neighbors = 3;
  bool bias_correction = true;
  double bias_ratio = 1.5; //!< b = bias_ratio * h
  int cv_candidates = 40;
  double cv_eval_fraction = 0.5;

  void validate() const;
};

//! Estimation sample, kept sorted by (distance, key, outcome) so every
//! downstream result is independent of the input row order. Rows with
//! d > 0 are treated.
struct RddData
{
  std::vector<double> d;
  std::vector<double> y;
  std::vector<std::int64_t> key; //!< tie-break for neighbour search (cell id)
  Eigen::MatrixXd covariates;    //!< n x k, k may be 0
  std::vector<int> group;        //!< fixed-effect group per row, or empty
  std::vector<int> cluster;      //!< cluster index per row, or empty

  std::size_t size() const { return d.size(); }
  std::size_t count_left() const;
  std::size_t count_right() const;

  //! Builds and sorts. Empty `key` means keys 0..n-1 in input order.
  static RddData from_vectors(std::vector<double> d, std::vector<double> y, std::vector<std::int64_t> key = {},
                              Eigen::MatrixXd covariates = {}, std::vector<int> group = {},
                              std::vector<int> cluster = {});
};

RddData make_rdd_data(const CellTable& table, const RddSpec& spec);

struct RddEstimate
{
  double beta = 0.0;    //!< conventional local-polynomial estimate
  double beta_bc = 0.0; //!< bias-corrected estimate (== beta when correction is off)
  double se_conventional = 0.0;
  double se_robust = 0.0;
  double p_value_robust = 1.0; //!< NaN when the outcome is constant within the window
  double h = 0.0;
  double b = 0.0;
  std::size_t n_left = 0;
  std::size_t n_right = 0;
  std::size_t n_total = 0;
  double intercept = 0.0;              //!< control-side limit at the cutoff
  std::vector<double> slopes_left;     //!< d^1..d^p coefficients, km units
  std::vector<double> slopes_right;
  std::vector<double> covariate_coefs; //!< kept covariates, then fixed-effect dummies
};

//! Triangular kernel max(0, 1 - |u|).
double kernel_weight(double u);

//! Conventional fit at bandwidth h: beta, intercept, slopes, se_conventional.
//! se_robust and p_value_robust describe the conventional interval.
RddEstimate local_poly_fit(const RddData& data, const RddSpec& spec, double h);

//! Nearest-neighbour variance per observation, side-aware. Neighbours are the
//! J closest same-side rows by |d_i - d_j|, ties broken by key.
std::vector<double> nn_variance(std::span<const double> d, std::span<const double> y,
                                std::span<const std::int64_t> key, int neighbors = 3);

struct BandwidthChoice
{
  double h = 0.0;
  double b = 0.0;
  std::vector<double> candidates;
  std::vector<double> criterion; //!< +inf where the candidate is not estimable
};

//! Log-spaced candidate grid between 2 x median spacing of the distinct |d|
//! values and max |d|.
std::vector<double> bandwidth_candidates(std::span<const double> d, int count);

//! Leave-one-out boundary cross-validation. For each of the nearest
//! `fraction` of rows per side, predicts y from a one-sided local fit on the
//! same-side rows farther from the cutoff, mimicking estimation at the
//! boundary. Returns one criterion value per candidate.
std::vector<double> cv_criterion(std::span<const double> d, std::span<const double> y, int p,
                                 std::span<const double> candidates, double fraction = 0.5);

//! Picks the candidate with the smallest criterion. Near-ties (within 1e-9 of
//! the outcome scale) resolve to the largest bandwidth.
BandwidthChoice select_bandwidth(const RddData& data, const RddSpec& spec);

//! Full estimate: bandwidth (manual or selected), conventional fit at h,
//! order p+1 fit at b for the bias correction, robust variance.
RddEstimate bias_corrected_estimate(const RddData& data, const RddSpec& spec);
RddEstimate bias_corrected_estimate(const RddData& data, const RddSpec& spec, double h, double b);

RddEstimate estimate(const CellTable& table, const RddSpec& spec);

struct PlotBin
{
  int side = 0; //!< -1 control, +1 treated
  int index = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean = 0.0; //!< NaN when count == 0
  double center() const { return 0.5 * (lo + hi); }
};

struct PlotFit
{
  int side = 0;
  int order = 0;
  std::vector<double> coefficients; //!< d^0..d^order, NaN if not estimable
};

struct RdPlotData
{
  std::vector<PlotBin> bins;
  std::vector<PlotFit> fits;
};

//! Evenly spaced bins over [-range, 0) and (0, range] with per-bin means, and
//! global polynomial fits of each requested order per side.
RdPlotData rd_plot_data(std::span<const double> d, std::span<const double> y, std::span<const int> orders,
                        int bins_per_side = 20, double range_km = 50.0);

namespace reference {

//! Exhaustive neighbour search.
std::vector<double> nn_variance(std::span<const double> d, std::span<const double> y,
                                std::span<const std::int64_t> key, int neighbors = 3);

//! Direct refits for every evaluation point, no running sums.
std::vector<double> cv_criterion(std::span<const double> d, std::span<const double> y, int p,
                                 std::span<const double> candidates, double fraction = 0.5);

//! Single-threaded X'WX in row order.
Eigen::MatrixXd weighted_gram(const DesignMatrix& x, std::span<const double> w);

} // namespace reference

//! X'WX accumulated over fixed 2048-row chunks in parallel and summed in chunk
//! order, so the result does not depend on the thread count.
Eigen::MatrixXd weighted_gram(const DesignMatrix& x, std::span<const double> w);

} // namespace border_rdd
