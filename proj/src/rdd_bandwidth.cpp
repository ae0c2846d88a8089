#include "border_rdd/error.hpp"
#include "border_rdd/rdd.hpp"
#include "border_rdd/text.hpp"
#include "rdd_internal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace border_rdd {

std::vector<double>
bandwidth_candidates(std::span<const double> d, int count)
{
  if (count < 1)
    throw DomainError("bandwidth_candidates: count must be >= 1");
  std::vector<double> u;
  u.reserve(d.size());
  for (double v : d)
    u.push_back(std::abs(v));
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  if (u.size() < 2)
    throw BandwidthFailureError("bandwidth_candidates: need at least two distinct distances");
  std::vector<double> gaps(u.size() - 1);
  for (std::size_t i = 1; i < u.size(); ++i)
    gaps[i - 1] = u[i] - u[i - 1];
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
  double median = gaps[gaps.size() / 2];
  if (gaps.size() % 2 == 0) {
    const double lower = *std::max_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2));
    median = 0.5 * (median + lower);
  }
  const double hmax = u.back();
  const double hmin = std::min(2.0 * median, hmax);
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = hmax;
    return out;
  }
  const double lmin = std::log(hmin);
  const double lmax = std::log(hmax);
  for (int k = 0; k < count; ++k)
    out[static_cast<std::size_t>(k)] = std::exp(lmin + (lmax - lmin) * k / (count - 1));
  out.front() = hmin;
  out.back() = hmax;
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

//! Rows of one side ordered by distance from the cutoff.
struct Side
{
  std::vector<double> u;
  std::vector<double> y;
  std::size_t n_eval = 0;
};

std::array<Side, 2>
split_sides(std::span<const double> d, std::span<const double> y, double fraction)
{
  if (y.size() != d.size())
    throw StructuralError("cv_criterion: d and y differ in length");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw DomainError("cv_criterion: evaluation fraction must be in (0, 1]");
  std::array<Side, 2> sides;
  for (int s = 0; s < 2; ++s) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if ((d[i] > 0.0) == (s == 1))
        idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const double ua = std::abs(d[a]), ub = std::abs(d[b]);
      return ua != ub ? ua < ub : y[a] < y[b];
    });
    Side& side = sides[static_cast<std::size_t>(s)];
    for (std::size_t i : idx) {
      side.u.push_back(std::abs(d[i]));
      side.y.push_back(y[i]);
    }
    side.n_eval = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(idx.size()) - 1e-9));
  }
  return sides;
}

double
finish_criterion(double sse, std::size_t count)
{
  return count == 0 ? kInf : sse / static_cast<double>(count);
}

constexpr int kMaxPow = 9; // 2p + 1 for p <= 4
using Powers = std::array<double, kMaxPow + 1>;

const std::array<Powers, kMaxPow + 1>&
binomial()
{
  static const auto table = [] {
    std::array<Powers, kMaxPow + 1> c{};
    for (std::size_t m = 0; m <= kMaxPow; ++m) {
      c[m][0] = 1.0;
      for (std::size_t k = 1; k <= m; ++k)
        c[m][k] = c[m - 1][k - 1] + (k < m ? c[m - 1][k] : 0.0);
    }
    return c;
  }();
  return table;
}

//! Running sums of (u - a)^k and y (u - a)^k restarted at every multiple a of
//! h. A window (u_i, u_i + h) touches at most two segments and every offset
//! inside a segment is below h, so shifting the sums to u_i by the binomial
//! expansion stays well conditioned however far the window is from zero.
class SegmentSums
{
public:
  SegmentSums(const Side& side, int p, double h, std::size_t rows)
    : side_(side)
    , p_(p)
    , ku_(static_cast<std::size_t>(2 * p + 2))
    , ky_(static_cast<std::size_t>(p + 2))
    , h_(h)
  {
    const std::size_t n = rows;
    seg_.resize(n);
    start_.resize(n);
    end_.resize(n);
    cu_.assign(n * ku_, 0.0);
    cy_.assign(n * ky_, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      seg_[j] = static_cast<long long>(std::floor(side.u[j] / h));
      const bool fresh = j == 0 || seg_[j] != seg_[j - 1];
      start_[j] = fresh ? j : start_[j - 1];
      const double t = side.u[j] - anchor(seg_[j]);
      double* u = &cu_[j * ku_];
      double* y = &cy_[j * ky_];
      if (!fresh) {
        std::copy_n(u - ku_, ku_, u);
        std::copy_n(y - ky_, ky_, y);
      }
      double pw = 1.0;
      for (std::size_t k = 0; k < ku_; ++k) {
        u[k] += pw;
        if (k < ky_)
          y[k] += side.y[j] * pw;
        pw *= t;
      }
    }
    for (std::size_t j = n; j-- > 0;)
      end_[j] = (j + 1 == n || seg_[j + 1] != seg_[j]) ? j + 1 : end_[j + 1];
  }

  //! S_m = sum (u_j - u_i)^m for m <= 2p+1 and Y_m = sum y_j (u_j - u_i)^m for
  //! m <= p+1 over rows j in [lo, hi).
  void window(std::size_t i, std::size_t lo, std::size_t hi, Powers& s, Powers& ys) const
  {
    s.fill(0.0);
    ys.fill(0.0);
    while (lo < hi) {
      const std::size_t stop = std::min(hi, end_[lo]);
      add_segment(i, lo, stop, s, ys);
      lo = stop;
    }
  }

private:
  double anchor(long long seg) const { return static_cast<double>(seg) * h_; }

  void add_segment(std::size_t i, std::size_t lo, std::size_t hi, Powers& s, Powers& ys) const
  {
    Powers tu{}, ty{};
    std::copy_n(&cu_[(hi - 1) * ku_], ku_, tu.begin());
    std::copy_n(&cy_[(hi - 1) * ky_], ky_, ty.begin());
    if (lo > start_[lo]) {
      for (std::size_t k = 0; k < ku_; ++k)
        tu[k] -= cu_[(lo - 1) * ku_ + k];
      for (std::size_t k = 0; k < ky_; ++k)
        ty[k] -= cy_[(lo - 1) * ky_ + k];
    }
    const double delta = anchor(seg_[lo]) - side_.u[i];
    Powers dp{};
    dp[0] = 1.0;
    for (std::size_t k = 1; k < ku_; ++k)
      dp[k] = dp[k - 1] * delta;
    const auto& c = binomial();
    for (std::size_t m = 0; m < ku_; ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k <= m; ++k)
        acc += c[m][k] * dp[m - k] * tu[k];
      s[m] += acc;
    }
    for (std::size_t m = 0; m < ky_; ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k <= m; ++k)
        acc += c[m][k] * dp[m - k] * ty[k];
      ys[m] += acc;
    }
  }

  const Side& side_;
  int p_;
  std::size_t ku_;
  std::size_t ky_;
  double h_;
  std::vector<long long> seg_;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> end_;
  std::vector<double> cu_;
  std::vector<double> cy_;
};

//! Squared prediction errors of one side at one bandwidth; false when some
//! evaluation point cannot be predicted.
template<typename Predict>
bool
side_sse(const Side& side, double h, Predict&& predict, double& sse, std::size_t& count)
{
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < side.n_eval; ++i) {
    while (lo < side.u.size() && side.u[lo] <= side.u[i])
      ++lo;
    hi = std::max(hi, lo);
    while (hi < side.u.size() && side.u[hi] - side.u[i] < h)
      ++hi;
    const auto pred = predict(i, lo, hi);
    if (!pred)
      return false;
    const double e = side.y[i] - *pred;
    sse += e * e;
    ++count;
  }
  return true;
}

//! Rows any evaluation window can reach.
std::size_t
reachable_rows(const Side& side, double h)
{
  if (side.n_eval == 0)
    return 0;
  const double last = side.u[side.n_eval - 1];
  return static_cast<std::size_t>(
    std::partition_point(side.u.begin(), side.u.end(), [&](double v) { return v - last < h; }) - side.u.begin());
}

bool
enough_support(std::size_t lo, std::size_t hi, std::size_t distinct, int p)
{
  return hi >= lo && hi - lo >= static_cast<std::size_t>(p + 2) && distinct >= static_cast<std::size_t>(p + 1);
}

void
check_order(int p)
{
  if (p < 1 || p > 4)
    throw DomainError("cv_criterion: order must be in [1, 4]");
}

} // namespace

std::vector<double>
cv_criterion(std::span<const double> d, std::span<const double> y, int p, std::span<const double> candidates,
             double fraction)
{
  check_order(p);
  const auto sides = split_sides(d, y, fraction);
  std::vector<double> out(candidates.size(), kInf);
  const auto nc = static_cast<std::ptrdiff_t>(candidates.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    const double h = candidates[static_cast<std::size_t>(c)];
    if (!(h > 0.0))
      continue;
    double sse = 0.0;
    std::size_t count = 0;
    bool ok = true;
    for (int s = 0; s < 2 && ok; ++s) {
      const Side& side = sides[static_cast<std::size_t>(s)];
      const SegmentSums sums(side, p, h, reachable_rows(side, h));
      std::vector<std::size_t> new_value(side.u.size() + 1, 0);
      for (std::size_t j = 0; j < side.u.size(); ++j)
        new_value[j + 1] = new_value[j] + (j > 0 && side.u[j] != side.u[j - 1] ? 1 : 0);
      auto predict = [&](std::size_t i, std::size_t lo, std::size_t hi) -> std::optional<double> {
        const std::size_t distinct = hi > lo ? 1 + new_value[hi] - new_value[lo + 1] : 0;
        if (!enough_support(lo, hi, distinct, p))
          return std::nullopt;
        Powers raw, rawy;
        sums.window(i, lo, hi, raw, rawy);
        // kernel weight 1 - t with t = (u_j - u_i) / h
        const long double ih = 1.0L / static_cast<long double>(h);
        std::array<long double, 9> mom{};
        std::array<long double, 5> rhs{};
        long double scale = 1.0L;
        for (std::size_t m = 0; m <= static_cast<std::size_t>(2 * p); ++m) {
          mom[m] = scale * (raw[m] - ih * raw[m + 1]);
          if (m <= static_cast<std::size_t>(p))
            rhs[m] = scale * (rawy[m] - ih * rawy[m + 1]);
          scale *= ih;
        }
        return detail::solve_intercept<long double>(mom, rhs, p);
      };
      ok = side_sse(side, h, predict, sse, count);
    }
    out[static_cast<std::size_t>(c)] = ok ? finish_criterion(sse, count) : kInf;
  }
  return out;
}

namespace reference {

std::vector<double>
cv_criterion(std::span<const double> d, std::span<const double> y, int p, std::span<const double> candidates,
             double fraction)
{
  check_order(p);
  const auto sides = split_sides(d, y, fraction);
  std::vector<double> out(candidates.size(), kInf);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double h = candidates[c];
    if (!(h > 0.0))
      continue;
    double sse = 0.0;
    std::size_t count = 0;
    bool ok = true;
    for (int s = 0; s < 2 && ok; ++s) {
      const Side& side = sides[static_cast<std::size_t>(s)];
      auto predict = [&](std::size_t i, std::size_t lo, std::size_t hi) -> std::optional<double> {
        std::array<double, 9> mom{};
        std::array<double, 5> rhs{};
        std::size_t n = 0, distinct = 0;
        for (std::size_t j = 0; j < side.u.size(); ++j) {
          const double gap = side.u[j] - side.u[i];
          if (!(gap > 0.0) || !(gap < h))
            continue;
          if (n == 0 || side.u[j] != side.u[j - 1])
            ++distinct;
          ++n;
          const double t = gap / h;
          const double w = 1.0 - t;
          double pw = 1.0;
          for (int m = 0; m <= 2 * p; ++m) {
            mom[static_cast<std::size_t>(m)] += w * pw;
            if (m <= p)
              rhs[static_cast<std::size_t>(m)] += w * pw * side.y[j];
            pw *= t;
          }
        }
        (void)lo;
        (void)hi;
        if (n < static_cast<std::size_t>(p + 2) || distinct < static_cast<std::size_t>(p + 1))
          return std::nullopt;
        return detail::solve_intercept<double>(mom, rhs, p);
      };
      ok = side_sse(side, h, predict, sse, count);
    }
    out[c] = ok ? finish_criterion(sse, count) : kInf;
  }
  return out;
}

} // namespace reference

BandwidthChoice
select_bandwidth(const RddData& data, const RddSpec& spec)
{
  spec.validate();
  const std::size_t nl = data.count_left();
  const std::size_t nr = data.count_right();
  if (nl < 20 || nr < 20)
    throw InsufficientObservationsError("select_bandwidth: need at least 20 observations per side, have " +
                                        std::to_string(nl) + " control and " + std::to_string(nr) + " treated");
  const std::vector<double> ytilde = detail::pilot_adjusted_outcome(data, spec.p);

  BandwidthChoice out;
  out.candidates = bandwidth_candidates(data.d, spec.cv_candidates);
  out.criterion = cv_criterion(data.d, ytilde, spec.p, out.candidates, spec.cv_eval_fraction);

  double best = kInf;
  for (double c : out.criterion)
    best = std::min(best, c);
  if (!std::isfinite(best))
    throw BandwidthFailureError("select_bandwidth: cross-validation criterion is not finite for any of " +
                                std::to_string(out.candidates.size()) + " candidate bandwidths");

  const double mean = std::accumulate(ytilde.begin(), ytilde.end(), 0.0) / static_cast<double>(ytilde.size());
  double var = 0.0;
  for (double v : ytilde)
    var += (v - mean) * (v - mean);
  var /= static_cast<double>(ytilde.size());
  const double tol = 1e-9 * (var + std::abs(best));
  for (std::size_t k = out.candidates.size(); k-- > 0;) {
    if (out.criterion[k] <= best + tol) {
      out.h = out.candidates[k];
      break;
    }
  }
  out.b = out.h * spec.bias_ratio;
  return out;
}

} // namespace border_rdd
