#include "border_rdd/error.hpp"
#include "border_rdd/rdd.hpp"
#include "border_rdd/text.hpp"
#include "rdd_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace border_rdd {

void
RddSpec::validate() const
{
  if (p < 1 || p > 4)
    throw ConfigError("rdd: polynomial order p must be in [1, 4]");
  if (manual_h && !(*manual_h > 0.0))
    throw ConfigError("rdd: manual bandwidth must be positive");
  if (nn_neighbors < 1)
    throw ConfigError("rdd: nn neighbours J must be >= 1");
  if (!(bias_ratio >= 1.0))
    throw ConfigError("rdd: bias_ratio must be >= 1 so that b >= h");
  if (cv_candidates < 1)
    throw ConfigError("rdd: cv_candidates must be >= 1");
  if (!(cv_eval_fraction > 0.0 && cv_eval_fraction <= 1.0))
    throw ConfigError("rdd: cv_eval_fraction must be in (0, 1]");
}

std::size_t
RddData::count_left() const
{
  return static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [](double v) { return v <= 0.0; }));
}

std::size_t
RddData::count_right() const
{
  return d.size() - count_left();
}

RddData
RddData::from_vectors(std::vector<double> d, std::vector<double> y, std::vector<std::int64_t> key,
                      Eigen::MatrixXd covariates, std::vector<int> group, std::vector<int> cluster)
{
  const std::size_t n = d.size();
  if (y.size() != n)
    throw StructuralError("RddData: d and y differ in length");
  if (key.empty()) {
    key.resize(n);
    std::iota(key.begin(), key.end(), 0);
  }
  if (key.size() != n || (!group.empty() && group.size() != n) || (!cluster.empty() && cluster.size() != n))
    throw StructuralError("RddData: column lengths differ");
  if (covariates.size() > 0 && static_cast<std::size_t>(covariates.rows()) != n)
    throw StructuralError("RddData: covariate rows differ from observations");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(d[i]) || !std::isfinite(y[i]))
      throw DomainError("RddData: non-finite distance or outcome at row " + std::to_string(i));
  }
  if (covariates.size() > 0 && !covariates.allFinite())
    throw DomainError("RddData: non-finite covariate value");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (d[a] != d[b])
      return d[a] < d[b];
    if (key[a] != key[b])
      return key[a] < key[b];
    return y[a] < y[b];
  });

  RddData out;
  out.d.resize(n);
  out.y.resize(n);
  out.key.resize(n);
  out.covariates.resize(static_cast<Eigen::Index>(n), covariates.cols());
  if (!group.empty())
    out.group.resize(n);
  if (!cluster.empty())
    out.cluster.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = order[i];
    out.d[i] = d[s];
    out.y[i] = y[s];
    out.key[i] = key[s];
    if (covariates.cols() > 0)
      out.covariates.row(static_cast<Eigen::Index>(i)) = covariates.row(static_cast<Eigen::Index>(s));
    if (!group.empty())
      out.group[i] = group[s];
    if (!cluster.empty())
      out.cluster[i] = cluster[s];
  }
  return out;
}

RddData
make_rdd_data(const CellTable& table, const RddSpec& spec)
{
  if (table.empty())
    throw EmptySampleError("rdd: empty cell table");
  auto d = column_values(table, "distance_km");
  auto y = column_values(table, spec.outcome);
  std::vector<std::int64_t> key;
  key.reserve(table.size());
  for (const auto& r : table.records)
    key.push_back(r.cell_id);

  Eigen::MatrixXd cov(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(spec.covariates.size()));
  for (std::size_t c = 0; c < spec.covariates.size(); ++c) {
    const auto col = column_values(table, spec.covariates[c]);
    for (std::size_t i = 0; i < col.size(); ++i)
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = col[i];
  }

  std::vector<int> group;
  if (spec.fixed_effect) {
    for (double g : column_values(table, *spec.fixed_effect))
      group.push_back(static_cast<int>(std::lround(g)));
  }

  std::vector<int> cluster;
  if (spec.variance == VarianceKind::cluster) {
    std::map<std::string, int> ids;
    for (const auto& r : table.records)
      ids.emplace(r.cluster_id, 0);
    int next = 0;
    for (auto& [name, id] : ids)
      id = next++;
    for (const auto& r : table.records)
      cluster.push_back(ids.at(r.cluster_id));
  }
  return RddData::from_vectors(std::move(d), std::move(y), std::move(key), std::move(cov), std::move(group),
                               std::move(cluster));
}

double
kernel_weight(double u)
{
  return std::max(0.0, 1.0 - std::abs(u));
}

Eigen::MatrixXd
weighted_gram(const DesignMatrix& x, std::span<const double> w)
{
  constexpr Eigen::Index kChunk = 2048;
  const Eigen::Index n = x.rows();
  const Eigen::Index k = x.cols();
  const Eigen::Index nchunks = (n + kChunk - 1) / kChunk;
  std::vector<Eigen::MatrixXd> partial(static_cast<std::size_t>(nchunks));
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < nchunks; ++c) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
    const Eigen::Index end = std::min(n, (c + 1) * kChunk);
    for (Eigen::Index i = c * kChunk; i < end; ++i) {
      const double wi = w[static_cast<std::size_t>(i)];
      if (wi == 0.0)
        continue;
      const double* row = x.data() + i * k;
      for (Eigen::Index a = 0; a < k; ++a) {
        const double wa = wi * row[a];
        for (Eigen::Index b = a; b < k; ++b)
          g(a, b) += wa * row[b];
      }
    }
    partial[static_cast<std::size_t>(c)] = std::move(g);
  }
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(k, k);
  for (const auto& g : partial)
    total += g;
  total.triangularView<Eigen::StrictlyLower>() = total.transpose().triangularView<Eigen::StrictlyLower>();
  return total;
}

namespace reference {

Eigen::MatrixXd
weighted_gram(const DesignMatrix& x, std::span<const double> w)
{
  const Eigen::Index k = x.cols();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b)
        g(a, b) += w[static_cast<std::size_t>(i)] * x(i, a) * x(i, b);
    }
  }
  return g;
}

} // namespace reference

namespace {

//! Contiguous slice of the sorted data with |d| < limit.
struct Window
{
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

Window
window_of(const RddData& data, double limit)
{
  const auto lo = std::upper_bound(data.d.begin(), data.d.end(), -limit);
  const auto hi = std::lower_bound(data.d.begin(), data.d.end(), limit);
  Window w;
  w.begin = static_cast<std::size_t>(lo - data.d.begin());
  w.end = std::max(w.begin, static_cast<std::size_t>(hi - data.d.begin()));
  return w;
}

//! Weighted least-squares fit of one polynomial order on a window.
struct WindowFit
{
  int order = 1;
  DesignMatrix x;
  std::vector<double> w;
  Eigen::VectorXd coef;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  Eigen::VectorXd col_scale;
  std::vector<int> kept_covariates; //!< indices into data.covariates columns
  std::vector<int> fe_groups;       //!< groups with a dummy column (reference excluded)
  Eigen::Index first_extra = 0;     //!< first covariate column
  std::size_t n_pos_left = 0;
  std::size_t n_pos_right = 0;

  Eigen::Index col_treated() const { return 1; }
  Eigen::Index col_poly(int k) const { return 2 * k; }           //!< (d/s)^k, k >= 1
  Eigen::Index col_treated_poly(int k) const { return 2 * k + 1; } //!< T (d/s)^k

  //! G^{-1} e_j
  Eigen::VectorXd functional(Eigen::Index j) const
  {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(coef.size());
    e(j) = col_scale(j);
    return (ldlt.solve(e).array() * col_scale.array()).matrix();
  }

  //! Per-row linear weights w_i x_i' G^{-1} e_j (the smoother row for coefficient j).
  std::vector<double> smoother(Eigen::Index j) const
  {
    const Eigen::VectorXd v = functional(j);
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
      out[i] = w[i] == 0.0 ? 0.0 : w[i] * x.row(static_cast<Eigen::Index>(i)).dot(v);
    return out;
  }
};

void
check_side_support(const RddData& data, const Window& win, const std::vector<double>& w, int order, double bw)
{
  std::size_t n[2] = { 0, 0 };
  std::size_t distinct[2] = { 0, 0 };
  double last[2] = { std::nan(""), std::nan("") };
  for (std::size_t i = win.begin; i < win.end; ++i) {
    if (w[i - win.begin] <= 0.0)
      continue;
    const int side = data.d[i] > 0.0 ? 1 : 0;
    ++n[side];
    if (!(data.d[i] == last[side])) {
      ++distinct[side];
      last[side] = data.d[i];
    }
  }
  const auto need = static_cast<std::size_t>(order + 2);
  for (int side = 0; side < 2; ++side) {
    if (n[side] < need || distinct[side] < static_cast<std::size_t>(order + 1)) {
      throw InsufficientObservationsError(
        std::string("rdd: ") + (side ? "treated" : "control") + " side has " + std::to_string(n[side]) +
        " observations (" + std::to_string(distinct[side]) + " distinct distances) with nonzero weight at bandwidth " +
        format_number(bw) + "; order " + std::to_string(order) + " needs " + std::to_string(need));
    }
  }
}

WindowFit
fit_window(const RddData& data, const Window& win, int order, double bw, double scale)
{
  WindowFit f;
  f.order = order;
  const std::size_t m = win.size();
  f.w.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    f.w[i] = kernel_weight(data.d[win.begin + i] / bw);
  check_side_support(data, win, f.w, order, bw);
  for (std::size_t i = 0; i < m; ++i) {
    if (f.w[i] > 0.0)
      ++(data.d[win.begin + i] > 0.0 ? f.n_pos_right : f.n_pos_left);
  }

  // covariates that are identically zero on the weighted sample carry no
  // information and are dropped instead of making the design singular
  for (Eigen::Index c = 0; c < data.covariates.cols(); ++c) {
    bool nonzero = false;
    for (std::size_t i = 0; i < m && !nonzero; ++i)
      nonzero = f.w[i] > 0.0 && data.covariates(static_cast<Eigen::Index>(win.begin + i), c) != 0.0;
    if (nonzero)
      f.kept_covariates.push_back(static_cast<int>(c));
  }
  if (!data.group.empty()) {
    std::set<int> present;
    for (std::size_t i = 0; i < m; ++i) {
      if (f.w[i] > 0.0)
        present.insert(data.group[win.begin + i]);
    }
    f.fe_groups.assign(std::next(present.begin()), present.end());
  }

  const Eigen::Index npoly = 2 * (order + 1);
  f.first_extra = npoly;
  const Eigen::Index k =
    npoly + static_cast<Eigen::Index>(f.kept_covariates.size()) + static_cast<Eigen::Index>(f.fe_groups.size());
  DesignMatrix xa(static_cast<Eigen::Index>(m), k + 1); // outcome in the last column
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t r = win.begin + i;
    const auto row = static_cast<Eigen::Index>(i);
    const double t = data.d[r] > 0.0 ? 1.0 : 0.0;
    const double v = data.d[r] / scale;
    double pw = 1.0;
    for (int j = 0; j <= order; ++j) {
      xa(row, 2 * j) = pw;
      xa(row, 2 * j + 1) = t * pw;
      pw *= v;
    }
    Eigen::Index c = npoly;
    for (int cov : f.kept_covariates)
      xa(row, c++) = data.covariates(static_cast<Eigen::Index>(r), cov);
    for (int g : f.fe_groups)
      xa(row, c++) = data.group[r] == g ? 1.0 : 0.0;
    xa(row, k) = data.y[r];
  }

  const Eigen::MatrixXd gaug = weighted_gram(xa, f.w);
  const Eigen::MatrixXd g = gaug.topLeftCorner(k, k);
  const Eigen::VectorXd xty = gaug.col(k).head(k);

  f.col_scale.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(g(j, j) > 0.0))
      throw MulticollinearityError("rdd: design column " + std::to_string(j) + " has no weighted variation");
    f.col_scale(j) = 1.0 / std::sqrt(g(j, j));
  }
  const Eigen::MatrixXd c = f.col_scale.asDiagonal() * g * f.col_scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (!(lmin > 1e-10 * lmax))
    throw MulticollinearityError("rdd: weighted design is rank deficient (condition " + format_number(lmax / lmin) +
                                 ")");
  f.ldlt.compute(c);
  f.coef = (f.ldlt.solve((f.col_scale.array() * xty.array()).matrix()).array() * f.col_scale.array()).matrix();
  f.x = xa.leftCols(k);
  return f;
}

//! Outcome with the covariate and fixed-effect contributions of `fit` removed.
std::vector<double>
adjusted_outcome(const RddData& data, const Window& win, const WindowFit& fit)
{
  std::vector<double> out(win.size());
  std::map<int, double> fe;
  Eigen::Index c = fit.first_extra + static_cast<Eigen::Index>(fit.kept_covariates.size());
  for (int g : fit.fe_groups)
    fe[g] = fit.coef(c++);
  for (std::size_t i = 0; i < win.size(); ++i) {
    const std::size_t r = win.begin + i;
    double v = data.y[r];
    Eigen::Index col = fit.first_extra;
    for (int cov : fit.kept_covariates)
      v -= fit.coef(col++) * data.covariates(static_cast<Eigen::Index>(r), cov);
    if (!data.group.empty()) {
      auto it = fe.find(data.group[r]);
      if (it != fe.end())
        v -= it->second;
    }
    out[i] = v;
  }
  return out;
}

double
cluster_variance(const RddData& data, const Window& win, const std::vector<double>& weights,
                 const std::vector<double>& resid, const WindowFit& fit)
{
  std::map<int, double> score;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < win.size(); ++i) {
    if (fit.w[i] > 0.0)
      ++npos;
    if (weights[i] == 0.0 && fit.w[i] == 0.0)
      continue;
    score[data.cluster[win.begin + i]] += weights[i] * resid[i];
  }
  std::set<int> clusters;
  for (std::size_t i = 0; i < win.size(); ++i) {
    if (fit.w[i] > 0.0)
      clusters.insert(data.cluster[win.begin + i]);
  }
  const double g = static_cast<double>(clusters.size());
  const double k = static_cast<double>(fit.coef.size());
  const double n = static_cast<double>(npos);
  if (g < 2.0 || n <= k)
    throw InsufficientObservationsError("rdd: cluster variance needs at least two clusters and n > k");
  double v = 0.0;
  for (const auto& [id, s] : score)
    v += s * s;
  return v * ((n - 1.0) / (n - k)) * (g / (g - 1.0));
}

double
normal_two_sided_p(double z)
{
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

RddEstimate
run_estimate(const RddData& data, const RddSpec& spec, double h, double b, bool bias_correct)
{
  spec.validate();
  if (!(h > 0.0) || !(b >= h))
    throw DomainError("rdd: bandwidths must satisfy 0 < h <= b");
  if (spec.variance == VarianceKind::cluster && data.cluster.empty())
    throw ConfigError("rdd: cluster variance requested but the data carries no cluster ids");
  const int p = spec.p;
  const Window win = window_of(data, bias_correct ? b : h);
  const WindowFit fp = fit_window(data, win, p, h, h);

  RddEstimate est;
  est.h = h;
  est.b = bias_correct ? b : h;
  est.n_total = data.size();
  est.n_left = fp.n_pos_left;
  est.n_right = fp.n_pos_right;
  est.beta = fp.coef(fp.col_treated());
  est.intercept = fp.coef(0);
  for (int k = 1; k <= p; ++k) {
    const double s = std::pow(h, k);
    est.slopes_left.push_back(fp.coef(fp.col_poly(k)) / s);
    est.slopes_right.push_back((fp.coef(fp.col_poly(k)) + fp.coef(fp.col_treated_poly(k))) / s);
  }
  for (Eigen::Index c = fp.first_extra; c < fp.coef.size(); ++c)
    est.covariate_coefs.push_back(fp.coef(c));

  // A constant outcome is fitted exactly by zero coefficients; without this
  // the round-off left in beta and its standard error yields a meaningless z.
  const auto y_first = data.y.begin() + static_cast<std::ptrdiff_t>(win.begin);
  if (std::all_of(y_first, y_first + static_cast<std::ptrdiff_t>(win.size()), [&](double v) { return v == *y_first; })) {
    est.beta = est.beta_bc = 0.0;
    est.intercept = *y_first;
    std::fill(est.slopes_left.begin(), est.slopes_left.end(), 0.0);
    std::fill(est.slopes_right.begin(), est.slopes_right.end(), 0.0);
    std::fill(est.covariate_coefs.begin(), est.covariate_coefs.end(), 0.0);
    est.p_value_robust = std::numeric_limits<double>::quiet_NaN();
    return est;
  }

  const std::vector<double> a = fp.smoother(fp.col_treated());
  std::vector<double> omega = a;
  est.beta_bc = est.beta;

  std::optional<WindowFit> fq;
  if (bias_correct) {
    fq = fit_window(data, win, p + 1, b, h);
    const std::vector<double> g_left = fq->smoother(fq->col_poly(p + 1));
    const std::vector<double> g_delta = fq->smoother(fq->col_treated_poly(p + 1));
    double c_left = 0.0, c_delta = 0.0;
    for (std::size_t i = 0; i < win.size(); ++i) {
      const double di = data.d[win.begin + i];
      const double r = std::pow(di / h, p + 1);
      c_left += a[i] * r;
      if (di > 0.0)
        c_delta += a[i] * r;
    }
    est.beta_bc = est.beta - c_left * fq->coef(fq->col_poly(p + 1)) - c_delta * fq->coef(fq->col_treated_poly(p + 1));
    for (std::size_t i = 0; i < win.size(); ++i)
      omega[i] = a[i] - c_left * g_left[i] - c_delta * g_delta[i];
  }

  double var_conv = 0.0, var_rob = 0.0;
  if (spec.variance == VarianceKind::nn) {
    const std::vector<double> ytilde = adjusted_outcome(data, win, fp);
    const std::span<const double> dw(data.d.data() + win.begin, win.size());
    const std::span<const std::int64_t> kw(data.key.data() + win.begin, win.size());
    const std::vector<double> sigma2 = nn_variance(dw, ytilde, kw, spec.nn_neighbors);
    for (std::size_t i = 0; i < win.size(); ++i) {
      var_conv += a[i] * a[i] * sigma2[i];
      var_rob += omega[i] * omega[i] * sigma2[i];
    }
  } else {
    std::vector<double> resid_p(win.size());
    for (std::size_t i = 0; i < win.size(); ++i)
      resid_p[i] = data.y[win.begin + i] - fp.x.row(static_cast<Eigen::Index>(i)).dot(fp.coef);
    var_conv = cluster_variance(data, win, a, resid_p, fp);
    if (fq) {
      std::vector<double> resid_q(win.size());
      for (std::size_t i = 0; i < win.size(); ++i)
        resid_q[i] = data.y[win.begin + i] - fq->x.row(static_cast<Eigen::Index>(i)).dot(fq->coef);
      // every row of the b-window carries weight in the q fit
      var_rob = cluster_variance(data, win, omega, resid_q, *fq);
    } else {
      var_rob = var_conv;
    }
  }
  est.se_conventional = std::sqrt(var_conv);
  est.se_robust = std::sqrt(var_rob);
  if (est.se_robust > 0.0)
    est.p_value_robust = normal_two_sided_p(est.beta_bc / est.se_robust);
  else
    est.p_value_robust = est.beta_bc == 0.0 ? 1.0 : 0.0;
  return est;
}

} // namespace

RddEstimate
local_poly_fit(const RddData& data, const RddSpec& spec, double h)
{
  return run_estimate(data, spec, h, h, false);
}

RddEstimate
bias_corrected_estimate(const RddData& data, const RddSpec& spec, double h, double b)
{
  return run_estimate(data, spec, h, b, spec.bias_correction);
}

RddEstimate
bias_corrected_estimate(const RddData& data, const RddSpec& spec)
{
  spec.validate();
  if (spec.manual_h)
    return bias_corrected_estimate(data, spec, *spec.manual_h, *spec.manual_h * spec.bias_ratio);
  const auto bw = select_bandwidth(data, spec);
  return bias_corrected_estimate(data, spec, bw.h, bw.b);
}

RddEstimate
estimate(const CellTable& table, const RddSpec& spec)
{
  return bias_corrected_estimate(make_rdd_data(table, spec), spec);
}

namespace detail {

//! Covariate/fixed-effect adjusted outcome from a wide pilot fit, used by the
//! bandwidth selector.
std::vector<double>
pilot_adjusted_outcome(const RddData& data, int p)
{
  if (data.covariates.cols() == 0 && data.group.empty())
    return data.y;
  double maxabs = 0.0;
  for (double v : data.d)
    maxabs = std::max(maxabs, std::abs(v));
  const double bw = maxabs * (1.0 + 1e-9) + 1e-12;
  const Window win{ 0, data.size() };
  const WindowFit fit = fit_window(data, win, p, bw, bw);
  return adjusted_outcome(data, win, fit);
}

} // namespace detail

} // namespace border_rdd
