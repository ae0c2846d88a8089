#include "border_rdd/error.hpp"
#include "border_rdd/rdd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace border_rdd {

namespace {

PlotFit
global_fit(std::span<const double> d, std::span<const double> y, int side, int order, double range)
{
  PlotFit fit;
  fit.side = side;
  fit.order = order;
  fit.coefficients.assign(static_cast<std::size_t>(order + 1), std::numeric_limits<double>::quiet_NaN());

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const bool in_side = side < 0 ? (d[i] <= 0.0 && d[i] >= -range) : (d[i] > 0.0 && d[i] <= range);
    if (in_side)
      rows.push_back(i);
  }
  const auto k = static_cast<Eigen::Index>(order + 1);
  if (static_cast<Eigen::Index>(rows.size()) < k)
    return fit;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), k);
  Eigen::VectorXd yy(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double v = d[rows[r]] / range;
    double pw = 1.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      x(static_cast<Eigen::Index>(r), c) = pw;
      pw *= v;
    }
    yy(static_cast<Eigen::Index>(r)) = y[rows[r]];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < k)
    return fit;
  const Eigen::VectorXd coef = qr.solve(yy);
  for (Eigen::Index c = 0; c < k; ++c)
    fit.coefficients[static_cast<std::size_t>(c)] = coef(c) / std::pow(range, static_cast<double>(c));
  return fit;
}

} // namespace

RdPlotData
rd_plot_data(std::span<const double> d, std::span<const double> y, std::span<const int> orders, int bins_per_side,
             double range_km)
{
  if (d.size() != y.size())
    throw StructuralError("rd_plot_data: d and y differ in length");
  if (bins_per_side < 1)
    throw DomainError("rd_plot_data: bins per side must be >= 1");
  if (!(range_km > 0.0))
    throw DomainError("rd_plot_data: range must be positive");
  for (int o : orders) {
    if (o < 1 || o > 4)
      throw DomainError("rd_plot_data: plot polynomial order must be in [1, 4]");
  }

  const double width = range_km / bins_per_side;
  const auto nb = static_cast<std::size_t>(bins_per_side);
  std::vector<double> sum[2] = { std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0) };
  std::vector<std::size_t> count[2] = { std::vector<std::size_t>(nb, 0), std::vector<std::size_t>(nb, 0) };
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double v = d[i];
    if (v < -range_km || v > range_km || v == 0.0)
      continue;
    const int s = v > 0.0 ? 1 : 0;
    long long k = s == 0 ? static_cast<long long>(std::floor((v + range_km) / width))
                         : static_cast<long long>(std::ceil(v / width)) - 1;
    k = std::clamp<long long>(k, 0, bins_per_side - 1);
    sum[s][static_cast<std::size_t>(k)] += y[i];
    ++count[s][static_cast<std::size_t>(k)];
  }

  RdPlotData out;
  for (int s = 0; s < 2; ++s) {
    for (std::size_t k = 0; k < nb; ++k) {
      PlotBin bin;
      bin.side = s == 0 ? -1 : 1;
      bin.index = static_cast<int>(k);
      bin.lo = s == 0 ? -range_km + width * static_cast<double>(k) : width * static_cast<double>(k);
      bin.hi = bin.lo + width;
      bin.count = count[s][k];
      bin.mean = bin.count ? sum[s][k] / static_cast<double>(bin.count) : std::numeric_limits<double>::quiet_NaN();
      out.bins.push_back(bin);
    }
  }
  for (int side : { -1, 1 }) {
    for (int o : orders)
      out.fits.push_back(global_fit(d, y, side, o, range_km));
  }
  return out;
}

} // namespace border_rdd
