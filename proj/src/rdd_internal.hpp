#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace border_rdd {
struct RddData;
}

namespace border_rdd::detail {

//! Solves the (p+1)x(p+1) moment system sum_b M[a+b] beta_b = T[a] and
//! returns beta_0, or nullopt when the system is numerically singular.
//! M holds moments 0..2p, T holds moments 0..p, both in scaled units.
template<typename Real>
std::optional<double>
solve_intercept(const std::array<Real, 9>& moments, const std::array<Real, 5>& rhs, int p)
{
  const int n = p + 1;
  Real a[5][6];
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c)
      a[r][c] = moments[r + c];
    a[r][n] = rhs[r];
  }
  const Real scale = std::abs(moments[0]);
  if (!(scale > 0))
    return std::nullopt;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col]))
        piv = r;
    }
    if (std::abs(a[piv][col]) <= Real(1e-12) * scale)
      return std::nullopt;
    if (piv != col) {
      for (int c = 0; c <= n; ++c)
        std::swap(a[piv][c], a[col][c]);
    }
    for (int r = col + 1; r < n; ++r) {
      const Real f = a[r][col] / a[col][col];
      for (int c = col; c <= n; ++c)
        a[r][c] -= f * a[col][c];
    }
  }
  Real x[5];
  for (int r = n - 1; r >= 0; --r) {
    Real s = a[r][n];
    for (int c = r + 1; c < n; ++c)
      s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return static_cast<double>(x[0]);
}

//! Outcome net of covariate and fixed-effect terms from an order-p fit over
//! the whole sample; the plain outcome when there is nothing to adjust.
std::vector<double> pilot_adjusted_outcome(const RddData& data, int p);

} // namespace border_rdd::detail
