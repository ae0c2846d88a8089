#include "border_rdd/error.hpp"
#include "border_rdd/rdd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace border_rdd {

namespace {

void
check_inputs(std::span<const double> d, std::span<const double> y, std::span<const std::int64_t> key, int neighbors)
{
  if (y.size() != d.size() || key.size() != d.size())
    throw StructuralError("nn_variance: d, y and key differ in length");
  if (neighbors < 1)
    throw DomainError("nn_variance: neighbour count must be >= 1");
  const auto right = static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [](double v) { return v > 0.0; }));
  for (const std::size_t count : { d.size() - right, right }) {
    if (count > 0 && count <= static_cast<std::size_t>(neighbors))
      throw InsufficientObservationsError("nn_variance: a side has " + std::to_string(count) +
                                          " observations, need more than J = " + std::to_string(neighbors));
  }
}

double
residual_variance(double yi, double neighbour_sum, std::size_t j)
{
  const double jd = static_cast<double>(j);
  const double r = yi - neighbour_sum / jd;
  return jd / (jd + 1.0) * r * r;
}

} // namespace

std::vector<double>
nn_variance(std::span<const double> d, std::span<const double> y, std::span<const std::int64_t> key, int neighbors)
{
  check_inputs(d, y, key, neighbors);
  const std::size_t n = d.size();
  std::vector<double> out(n, 0.0);
  const auto want = static_cast<std::size_t>(neighbors);

  for (int side = 0; side < 2; ++side) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
      if ((d[i] > 0.0) == (side == 1))
        idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return d[a] != d[b] ? d[a] < d[b] : key[a] < key[b];
    });
    const auto m = static_cast<std::ptrdiff_t>(idx.size());

#pragma omp parallel
    {
      std::vector<std::size_t> level;
#pragma omp for schedule(static)
      for (std::ptrdiff_t pos = 0; pos < m; ++pos) {
        const std::size_t i = idx[static_cast<std::size_t>(pos)];
        const double di = d[i];
        std::ptrdiff_t lo = pos - 1;
        std::ptrdiff_t hi = pos + 1;
        std::size_t taken = 0;
        double sum = 0.0;
        // walk outwards one distance level at a time; rows at the same
        // distance are consumed in key order, like the exhaustive search
        while (taken < want && (lo >= 0 || hi < m)) {
          const double dl = lo >= 0 ? std::abs(di - d[idx[static_cast<std::size_t>(lo)]]) : HUGE_VAL;
          const double dh = hi < m ? std::abs(di - d[idx[static_cast<std::size_t>(hi)]]) : HUGE_VAL;
          const double dist = std::min(dl, dh);
          level.clear();
          while (lo >= 0 && std::abs(di - d[idx[static_cast<std::size_t>(lo)]]) == dist)
            level.push_back(idx[static_cast<std::size_t>(lo--)]);
          while (hi < m && std::abs(di - d[idx[static_cast<std::size_t>(hi)]]) == dist)
            level.push_back(idx[static_cast<std::size_t>(hi++)]);
          std::sort(level.begin(), level.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
          for (std::size_t j : level) {
            if (taken == want)
              break;
            sum += y[j];
            ++taken;
          }
        }
        out[i] = residual_variance(y[i], sum, taken);
      }
    }
  }
  return out;
}

namespace reference {

std::vector<double>
nn_variance(std::span<const double> d, std::span<const double> y, std::span<const std::int64_t> key, int neighbors)
{
  check_inputs(d, y, key, neighbors);
  const std::size_t n = d.size();
  std::vector<double> out(n, 0.0);
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < n; ++i) {
    others.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && (d[j] > 0.0) == (d[i] > 0.0))
        others.push_back(j);
    }
    std::sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
      const double da = std::abs(d[i] - d[a]);
      const double db = std::abs(d[i] - d[b]);
      return da != db ? da < db : key[a] < key[b];
    });
    const std::size_t take = std::min(others.size(), static_cast<std::size_t>(neighbors));
    double sum = 0.0;
    for (std::size_t k = 0; k < take; ++k)
      sum += y[others[k]];
    out[i] = residual_variance(y[i], sum, take);
  }
  return out;
}

} // namespace reference

} // namespace border_rdd
