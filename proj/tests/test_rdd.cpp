#include "border_rdd/error.hpp"
#include "border_rdd/rdd.hpp"
#include "oracles.hpp"

#include <boost/math/distributions/normal.hpp>
#include <doctest.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace border_rdd;

namespace {

struct Sample
{
  std::vector<double> d, y;
  std::vector<std::int64_t> key;
  Eigen::MatrixXd cov;
  std::vector<int> group;
};

Sample
draw(std::mt19937_64& gen, std::size_t n, int ncov, bool fe, double jump = 0.8, double range = 30.0)
{
  std::uniform_real_distribution<double> u(-range, range);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> g(0, 3);
  Sample s;
  s.cov.resize(static_cast<Eigen::Index>(n), ncov);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = u(gen);
    double y = 1.0 + jump * (d > 0.0) + 0.05 * d + 0.002 * d * d + 0.3 * z(gen);
    for (int c = 0; c < ncov; ++c) {
      const double x = z(gen) + 0.01 * d * c;
      s.cov(static_cast<Eigen::Index>(i), c) = x;
      y += 0.4 * (c + 1) * x;
    }
    if (fe) {
      s.group.push_back(g(gen));
      y += 0.7 * s.group.back();
    }
    s.d.push_back(d);
    s.y.push_back(y);
    s.key.push_back(static_cast<std::int64_t>(1000 + i));
  }
  return s;
}

RddData
to_data(const Sample& s)
{
  return RddData::from_vectors(s.d, s.y, s.key, s.cov, s.group);
}

//! Explicit weighted fit in km units with columns
//! 1, T, d..d^p, T d..T d^p, covariates, group dummies (smallest present group omitted).
struct OracleFit
{
  std::vector<double> coef;
  std::vector<std::size_t> rows;
  int p = 1;
  std::size_t ncov = 0;

  double treated() const { return coef[1]; }
  double left(int k) const { return coef[1 + static_cast<std::size_t>(k)]; }
  double delta(int k) const { return coef[1 + static_cast<std::size_t>(p + k)]; }
};

OracleFit
oracle_fit(const Sample& s, const std::vector<double>& y, int p, double h)
{
  OracleFit f;
  f.p = p;
  f.ncov = static_cast<std::size_t>(s.cov.cols());
  std::set<int> present;
  for (std::size_t i = 0; i < s.d.size(); ++i) {
    if (std::abs(s.d[i]) < h) {
      f.rows.push_back(i);
      if (!s.group.empty())
        present.insert(s.group[i]);
    }
  }
  std::vector<int> dummies;
  if (!present.empty())
    dummies.assign(std::next(present.begin()), present.end());
  oracle::Matrix x;
  std::vector<double> yy, w;
  for (auto i : f.rows) {
    const double t = s.d[i] > 0.0 ? 1.0 : 0.0;
    std::vector<double> row = { 1.0, t };
    for (int k = 1; k <= p; ++k)
      row.push_back(std::pow(s.d[i], k));
    for (int k = 1; k <= p; ++k)
      row.push_back(t * std::pow(s.d[i], k));
    for (Eigen::Index c = 0; c < s.cov.cols(); ++c)
      row.push_back(s.cov(static_cast<Eigen::Index>(i), c));
    for (int g : dummies)
      row.push_back(s.group[i] == g ? 1.0 : 0.0);
    x.push_back(row);
    yy.push_back(y[i]);
    w.push_back(1.0 - std::abs(s.d[i]) / h);
  }
  f.coef = oracle::weighted_ols(x, yy, w);
  return f;
}

double
oracle_beta_bc(const Sample& s, const std::vector<double>& y, int p, double h, double b)
{
  const auto conv = oracle_fit(s, y, p, h);
  const auto q = oracle_fit(s, y, p + 1, b);
  std::vector<double> z(s.d.size(), 0.0);
  for (std::size_t i = 0; i < s.d.size(); ++i) {
    const double t = s.d[i] > 0.0 ? 1.0 : 0.0;
    z[i] = std::pow(s.d[i], p + 1) * (q.left(p + 1) + t * q.delta(p + 1));
  }
  return conv.treated() - oracle_fit(s, z, p, h).treated();
}

RddSpec
plain_spec(int p = 1)
{
  RddSpec spec;
  spec.p = p;
  return spec;
}

void
check_close(double got, double want, double tol)
{
  CHECK(std::abs(got - want) <= tol * std::max(1.0, std::abs(want)));
}

} // namespace

TEST_SUITE("rdd")
{
  TEST_CASE("triangular kernel")
  {
    CHECK(kernel_weight(0.0) == 1.0);
    CHECK(kernel_weight(0.5) == 0.5);
    CHECK(kernel_weight(-0.5) == 0.5);
    CHECK(kernel_weight(1.2) == 0.0);
    CHECK(kernel_weight(-1.2) == 0.0);
  }

  TEST_CASE("an exactly linear jump is recovered at any bandwidth")
  {
    std::vector<double> d, y, y10;
    for (int i = -200; i <= 200; ++i) {
      if (i == 0)
        continue;
      const double v = i * 0.23;
      d.push_back(v);
      y.push_back(1.0 + 2.0 * (v > 0.0) + 0.5 * v);
      y10.push_back(y.back() + 10.0);
    }
    const auto data = RddData::from_vectors(d, y);
    const auto data10 = RddData::from_vectors(d, y10);
    for (double h : { 3.0, 10.0, 25.0, 46.0 }) {
      const auto e = local_poly_fit(data, plain_spec(), h);
      CHECK(std::abs(e.beta - 2.0) <= 2e-10);
      const auto e10 = local_poly_fit(data10, plain_spec(), h);
      CHECK(std::abs(e10.beta - 2.0) <= 2e-10);
      CHECK(e10.intercept == doctest::Approx(11.0).epsilon(1e-10));
      CHECK(e10.slopes_left[0] == doctest::Approx(0.5).epsilon(1e-10));
      CHECK(e10.slopes_right[0] == doctest::Approx(0.5).epsilon(1e-10));
      const auto bc = bias_corrected_estimate(data, plain_spec(), h, 1.5 * h);
      CHECK(std::abs(bc.beta_bc - bc.beta) < 1e-8);
    }
  }

  TEST_CASE("an exact quadratic leaves nothing for the bias correction at p = 2")
  {
    std::vector<double> d, y;
    for (int i = -300; i <= 300; ++i) {
      const double v = i * 0.17 + 0.05;
      d.push_back(v);
      y.push_back(3.0 - 1.5 * (v > 0.0) + 0.2 * v - 0.01 * v * v + (v > 0.0) * 0.003 * v * v);
    }
    const auto data = RddData::from_vectors(d, y);
    const auto e = bias_corrected_estimate(data, plain_spec(2), 20.0, 30.0);
    CHECK(std::abs(e.beta - (-1.5)) < 1e-8);
    CHECK(std::abs(e.beta_bc - e.beta) < 1e-8);
  }

  TEST_CASE("an effectively flat kernel reproduces ordinary least squares")
  {
    std::mt19937_64 gen(10);
    const auto s = draw(gen, 60, 0, false);
    const auto e = local_poly_fit(to_data(s), plain_spec(), 1e12);
    oracle::Matrix x;
    for (double d : s.d)
      x.push_back({ 1.0, d > 0.0 ? 1.0 : 0.0, d, d > 0.0 ? d : 0.0 });
    const auto c = oracle::ols(x, s.y);
    check_close(e.intercept, c[0], 1e-8);
    check_close(e.beta, c[1], 1e-8);
    check_close(e.slopes_left[0], c[2], 1e-8);
    check_close(e.slopes_right[0], c[2] + c[3], 1e-8);
  }

  TEST_CASE("weighted fits with covariates and fixed effects match the normal equations")
  {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> hpick(8.0, 40.0);
    for (int rep = 0; rep < 50; ++rep) {
      const int p = 1 + rep % 2;
      const int ncov = rep % 4;
      const bool fe = rep % 3 == 0;
      const auto s = draw(gen, 150 + 10 * static_cast<std::size_t>(rep), ncov, fe);
      const double h = hpick(gen);
      const auto e = local_poly_fit(to_data(s), plain_spec(p), h);
      const auto o = oracle_fit(s, s.y, p, h);
      check_close(e.beta, o.treated(), 1e-8);
      check_close(e.intercept, o.coef[0], 1e-8);
      for (int k = 1; k <= p; ++k) {
        check_close(e.slopes_left[static_cast<std::size_t>(k - 1)], o.left(k), 1e-8);
        check_close(e.slopes_right[static_cast<std::size_t>(k - 1)], o.left(k) + o.delta(k), 1e-8);
      }
      REQUIRE(e.covariate_coefs.size() == o.coef.size() - static_cast<std::size_t>(2 + 2 * p));
      for (std::size_t c = 0; c < e.covariate_coefs.size(); ++c)
        check_close(e.covariate_coefs[c], o.coef[static_cast<std::size_t>(2 + 2 * p) + c], 1e-8);
    }
  }

  TEST_CASE("bias-corrected estimate and robust standard error match an explicit construction")
  {
    std::mt19937_64 gen(12);
    for (int rep = 0; rep < 6; ++rep) {
      const int p = 1 + rep % 2;
      const auto s = draw(gen, 160, rep % 3 == 2 ? 1 : 0, false);
      const double h = 14.0 + rep, b = 1.5 * h;
      const auto data = to_data(s);
      const auto e = bias_corrected_estimate(data, plain_spec(p), h, b);
      check_close(e.beta, oracle_fit(s, s.y, p, h).treated(), 1e-8);
      check_close(e.beta_bc, oracle_beta_bc(s, s.y, p, h, b), 1e-8);
      if (s.cov.cols() > 0)
        continue;

      // linear weights of beta and beta_bc, one unit vector at a time
      std::vector<double> dw, yw, a, omega;
      std::vector<std::int64_t> kw;
      for (std::size_t i = 0; i < s.d.size(); ++i) {
        if (std::abs(s.d[i]) >= b)
          continue;
        std::vector<double> unit(s.d.size(), 0.0);
        unit[i] = 1.0;
        a.push_back(std::abs(s.d[i]) < h ? oracle_fit(s, unit, p, h).treated() : 0.0);
        omega.push_back(oracle_beta_bc(s, unit, p, h, b));
        dw.push_back(s.d[i]);
        yw.push_back(s.y[i]);
        kw.push_back(s.key[i]);
      }
      const auto sigma2 = oracle::nn_variance(dw, yw, kw, 3);
      double vc = 0.0, vr = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        vc += a[i] * a[i] * sigma2[i];
        vr += omega[i] * omega[i] * sigma2[i];
      }
      check_close(e.se_conventional, std::sqrt(vc), 1e-8);
      check_close(e.se_robust, std::sqrt(vr), 1e-8);
      const boost::math::normal_distribution<double> norm;
      const double p_want = 2.0 * boost::math::cdf(boost::math::complement(norm, std::abs(e.beta_bc / e.se_robust)));
      CHECK(e.p_value_robust == doctest::Approx(p_want).epsilon(1e-12));
      CHECK(e.n_left + e.n_right <= e.n_total);
    }
  }

  TEST_CASE("nearest-neighbour variance")
  {
    const std::vector<double> d = { 1.0, 2.0, 3.0, 4.0 };
    const std::vector<double> y = { 0.0, 0.0, 0.0, 4.0 };
    const std::vector<std::int64_t> key = { 1, 2, 3, 4 };
    const auto s2 = nn_variance(d, y, key, 3);
    CHECK(s2[3] == 12.0);
    CHECK(s2[0] == doctest::Approx(0.75 * (4.0 / 3.0) * (4.0 / 3.0)));

    const std::vector<double> flat = { 5.0, 5.0, 5.0, 5.0 };
    for (double v : nn_variance(d, flat, key, 3))
      CHECK(v == 0.0);

    const std::vector<double> d2 = { -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0 };
    const std::vector<double> y2(7, 1.0);
    const std::vector<std::int64_t> k2 = { 1, 2, 3, 4, 5, 6, 7 };
    CHECK_THROWS_AS(nn_variance(d2, y2, k2, 3), InsufficientObservationsError);
  }

  TEST_CASE("nearest-neighbour variance equals exhaustive search, ties included")
  {
    std::mt19937_64 gen(13);
    std::uniform_int_distribution<int> grid(-40, 40);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> d, y;
      std::vector<std::int64_t> key;
      for (int i = 0; i < 300; ++i) {
        int v = grid(gen);
        if (v == 0)
          v = 1;
        d.push_back(0.5 * v); // coarse lattice forces many distance ties
        y.push_back(z(gen));
        key.push_back(static_cast<std::int64_t>(gen() % 100000));
      }
      // the library expects rows sorted as RddData sorts them
      const auto data = RddData::from_vectors(d, y, key);
      for (int J : { 1, 3, 5 }) {
        const auto got = nn_variance(data.d, data.y, data.key, J);
        const auto want = oracle::nn_variance(data.d, data.y, data.key, J);
        const auto ref = reference::nn_variance(data.d, data.y, data.key, J);
        CHECK(got == want);
        CHECK(ref == want);
      }
    }
  }

  TEST_CASE("cross-validation criterion matches explicit leave-one-out refits")
  {
    std::mt19937_64 gen(14);
    for (int rep = 0; rep < 8; ++rep) {
      const auto s = draw(gen, 120, 0, false);
      const int p = 1 + rep % 2;
      const auto cands = bandwidth_candidates(s.d, 12);
      const double frac = rep % 2 ? 0.5 : 0.3;
      const auto fast = cv_criterion(s.d, s.y, p, cands, frac);
      const auto ref = reference::cv_criterion(s.d, s.y, p, cands, frac);
      const auto want = oracle::cv_criterion(s.d, s.y, p, cands, frac);
      REQUIRE(fast.size() == want.size());
      for (std::size_t k = 0; k < want.size(); ++k) {
        if (std::isinf(want[k])) {
          CHECK(std::isinf(fast[k]));
          CHECK(std::isinf(ref[k]));
        } else {
          CHECK(fast[k] == doctest::Approx(want[k]).epsilon(1e-8));
          CHECK(ref[k] == doctest::Approx(want[k]).epsilon(1e-8));
        }
      }
    }
  }

  TEST_CASE("candidate bandwidths are log spaced between twice the median gap and the largest distance")
  {
    std::vector<double> d;
    for (int i = 1; i <= 100; ++i) {
      d.push_back(0.5 * i);
      d.push_back(-0.5 * i);
    }
    const auto c = bandwidth_candidates(d, 40);
    REQUIRE(c.size() == 40);
    CHECK(c.front() == doctest::Approx(1.0));
    CHECK(c.back() == 50.0);
    for (std::size_t k = 2; k < c.size(); ++k)
      CHECK(c[k] / c[k - 1] == doctest::Approx(c[1] / c[0]).epsilon(1e-9));
    CHECK_THROWS_AS(bandwidth_candidates(std::vector<double>{ 1.0, -1.0 }, 5), BandwidthFailureError);
  }

  TEST_CASE("linear data selects the widest bandwidth")
  {
    std::vector<double> d, y;
    for (int i = 1; i <= 200; ++i) {
      d.push_back(0.25 * i);
      y.push_back(2.0 + 0.1 * 0.25 * i);
      d.push_back(-0.25 * i);
      y.push_back(1.0 - 0.3 * 0.25 * i);
    }
    const auto bw = select_bandwidth(RddData::from_vectors(d, y), plain_spec());
    CHECK(bw.h == bw.candidates.back());
    CHECK(bw.b == 1.5 * bw.h);
  }

  TEST_CASE("bandwidth selection needs twenty observations per side")
  {
    std::vector<double> d, y;
    for (int i = 1; i <= 19; ++i) {
      d.push_back(-i * 1.0);
      y.push_back(0.0);
    }
    for (int i = 1; i <= 100; ++i) {
      d.push_back(i * 0.3);
      y.push_back(i % 3);
    }
    CHECK_THROWS_AS(select_bandwidth(RddData::from_vectors(d, y), plain_spec()), InsufficientObservationsError);
  }

  TEST_CASE("too few weighted observations on a side")
  {
    std::vector<double> d = { -1.0, -2.0, 1.0, 2.0, 3.0, 4.0, 5.0 };
    std::vector<double> y = { 1, 2, 3, 4, 5, 6, 8 };
    CHECK_THROWS_AS(local_poly_fit(RddData::from_vectors(d, y), plain_spec(), 10.0), InsufficientObservationsError);
  }

  TEST_CASE("a planted jump on a curved surface is recovered within three robust standard errors")
  {
    std::mt19937_64 gen(15);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> d, y;
    for (int i = 0; i < 20000; ++i) {
      const double v = u(gen);
      d.push_back(v);
      y.push_back(4.0 + 2.0 * (v > 0.0) + 0.04 * v + 0.002 * v * v - 0.00003 * v * v * v + z(gen));
    }
    const auto e = bias_corrected_estimate(RddData::from_vectors(d, y), plain_spec());
    CHECK(std::abs(e.beta_bc - 2.0) <= 3.0 * e.se_robust);
    CHECK(e.se_robust > e.se_conventional * 0.5);
    CHECK(e.b >= e.h);
  }

  TEST_CASE("affine changes of the outcome move beta and leave the p-value alone")
  {
    std::mt19937_64 gen(16);
    const auto s = draw(gen, 2000, 1, false);
    const auto base = bias_corrected_estimate(to_data(s), plain_spec());
    for (auto [a, c] : { std::pair{ 3.0, -7.0 }, std::pair{ -0.25, 100.0 } }) {
      auto t = s;
      for (double& v : t.y)
        v = a * v + c;
      const auto e = bias_corrected_estimate(to_data(t), plain_spec());
      CHECK(e.h == base.h);
      CHECK(e.beta == doctest::Approx(a * base.beta).epsilon(1e-9));
      CHECK(e.beta_bc == doctest::Approx(a * base.beta_bc).epsilon(1e-9));
      CHECK(e.se_robust == doctest::Approx(std::abs(a) * base.se_robust).epsilon(1e-9));
      CHECK(e.p_value_robust == doctest::Approx(base.p_value_robust).epsilon(1e-9));
    }
  }

  TEST_CASE("row order does not matter")
  {
    std::mt19937_64 gen(17);
    auto s = draw(gen, 1500, 2, true);
    const auto base = bias_corrected_estimate(to_data(s), plain_spec());
    std::vector<std::size_t> perm(s.d.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    Sample t = s;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      t.d[i] = s.d[perm[i]];
      t.y[i] = s.y[perm[i]];
      t.key[i] = s.key[perm[i]];
      t.group[i] = s.group[perm[i]];
      t.cov.row(static_cast<Eigen::Index>(i)) = s.cov.row(static_cast<Eigen::Index>(perm[i]));
    }
    const auto e = bias_corrected_estimate(to_data(t), plain_spec());
    CHECK(e.beta_bc == base.beta_bc);
    CHECK(e.se_robust == base.se_robust);
    CHECK(e.h == base.h);
  }

  TEST_CASE("a zero covariate is ignored and a constant one is collinear")
  {
    std::mt19937_64 gen(18);
    auto s = draw(gen, 400, 0, false);
    RddSpec spec = plain_spec();
    spec.manual_h = 20.0;
    const auto base = bias_corrected_estimate(to_data(s), spec);
    auto zero = s;
    zero.cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.d.size()), 1);
    const auto e = bias_corrected_estimate(to_data(zero), spec);
    CHECK(e.beta == base.beta);
    CHECK(e.beta_bc == base.beta_bc);
    auto constant = s;
    constant.cov = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(s.d.size()), 1, 5.0);
    CHECK_THROWS_AS(bias_corrected_estimate(to_data(constant), spec), MulticollinearityError);
  }

  TEST_CASE("group dummies agree with weighted within-group demeaning")
  {
    std::mt19937_64 gen(19);
    for (int rep = 0; rep < 5; ++rep) {
      const auto s = draw(gen, 500, 0, true);
      const double h = 18.0 + rep;
      const auto e = local_poly_fit(to_data(s), plain_spec(), h);

      // columns T, d, T d and y, each demeaned by its kernel-weighted group mean
      std::map<int, std::array<double, 5>> sums; // weight, T, d, Td, y
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < s.d.size(); ++i) {
        if (std::abs(s.d[i]) >= h)
          continue;
        rows.push_back(i);
        const double w = 1.0 - std::abs(s.d[i]) / h, t = s.d[i] > 0.0;
        auto& a = sums[s.group[i]];
        a[0] += w;
        a[1] += w * t;
        a[2] += w * s.d[i];
        a[3] += w * t * s.d[i];
        a[4] += w * s.y[i];
      }
      oracle::Matrix x;
      std::vector<double> yy, w;
      for (auto i : rows) {
        const auto& a = sums[s.group[i]];
        const double t = s.d[i] > 0.0;
        x.push_back({ t - a[1] / a[0], s.d[i] - a[2] / a[0], t * s.d[i] - a[3] / a[0] });
        yy.push_back(s.y[i] - a[4] / a[0]);
        w.push_back(1.0 - std::abs(s.d[i]) / h);
      }
      const auto c = oracle::weighted_ols(x, yy, w);
      check_close(e.beta, c[0], 1e-8);
      check_close(e.slopes_left[0], c[1], 1e-8);
    }
  }

  TEST_CASE("rows beyond both bandwidths have no influence")
  {
    std::mt19937_64 gen(20);
    auto s = draw(gen, 800, 1, false);
    RddSpec spec = plain_spec();
    spec.manual_h = 12.0;
    const auto base = bias_corrected_estimate(to_data(s), spec);
    for (std::size_t i = 0; i < s.d.size(); ++i) {
      if (std::abs(s.d[i]) >= 18.0) {
        s.y[i] += 1000.0 * std::sin(static_cast<double>(i));
        s.cov(static_cast<Eigen::Index>(i), 0) = -50.0;
      }
    }
    const auto e = bias_corrected_estimate(to_data(s), spec);
    CHECK(e.beta_bc == base.beta_bc);
    CHECK(e.se_robust == base.se_robust);
    CHECK(e.se_conventional == base.se_conventional);
  }

  TEST_CASE("cluster variance runs and differs from the neighbour variance")
  {
    std::mt19937_64 gen(21);
    auto s = draw(gen, 1000, 0, false);
    std::vector<int> cluster;
    for (double d : s.d)
      cluster.push_back(static_cast<int>(std::floor((d + 30.0) / 3.0)));
    const auto data = RddData::from_vectors(s.d, s.y, s.key, s.cov, {}, cluster);
    RddSpec spec = plain_spec();
    spec.variance = VarianceKind::cluster;
    const auto e = bias_corrected_estimate(data, spec, 15.0, 22.5);
    CHECK(e.se_robust > 0.0);
    CHECK(e.p_value_robust >= 0.0);
    CHECK(e.p_value_robust <= 1.0);
    CHECK_THROWS_AS(bias_corrected_estimate(to_data(s), spec, 15.0, 22.5), ConfigError);
  }

  TEST_CASE("the parallel Gram matrix matches the serial one and ignores the thread count")
  {
    std::mt19937_64 gen(22);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DesignMatrix x(10000, 6);
    std::vector<double> w(10000);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        x(i, j) = z(gen);
      w[static_cast<std::size_t>(i)] = u(gen) < 0.2 ? 0.0 : u(gen);
    }
    const auto ref = reference::weighted_gram(x, w);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const Eigen::MatrixXd one = weighted_gram(x, w);
    omp_set_num_threads(4);
    const Eigen::MatrixXd four = weighted_gram(x, w);
    omp_set_num_threads(saved);
    CHECK(one == four);
    CHECK((one - ref).cwiseAbs().maxCoeff() <= 1e-10 * ref.cwiseAbs().maxCoeff());
  }

  TEST_CASE("a constant outcome has zero jump and no p-value")
  {
    std::vector<double> d, y;
    for (int i = 1; i <= 50; ++i) {
      d.push_back(i * 0.5);
      d.push_back(-i * 0.5);
      y.push_back(1.0);
      y.push_back(1.0);
    }
    const auto e = bias_corrected_estimate(RddData::from_vectors(d, y), plain_spec(), 10.0, 15.0);
    CHECK(e.beta_bc == 0.0);
    CHECK(e.intercept == 1.0);
    CHECK(std::isnan(e.p_value_robust));
  }

  TEST_CASE("plot bins and global fits")
  {
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> u(-60.0, 60.0);
    std::vector<double> d, y, flat, line;
    for (int i = 0; i < 3000; ++i) {
      d.push_back(u(gen));
      y.push_back(std::sin(d.back()));
      flat.push_back(2.5);
      line.push_back(d.back() > 0.0 ? 1.0 + 0.3 * d.back() : -2.0 + 0.1 * d.back());
    }
    d.push_back(-50.0);
    y.push_back(0.0);
    flat.push_back(2.5);
    line.push_back(-7.0);
    d.push_back(50.0);
    y.push_back(0.0);
    flat.push_back(2.5);
    line.push_back(16.0);
    const std::vector<int> orders = { 1, 3 };

    const auto plot = rd_plot_data(d, y, orders, 20, 50.0);
    REQUIRE(plot.bins.size() == 40);
    for (const auto& bin : plot.bins) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        const bool in = bin.side < 0 ? (d[i] >= bin.lo && d[i] < bin.hi) : (d[i] > bin.lo && d[i] <= bin.hi);
        if (in) {
          sum += y[i];
          ++n;
        }
      }
      CHECK(bin.count == n);
      CHECK(bin.mean == doctest::Approx(sum / static_cast<double>(n)).epsilon(1e-12));
    }

    for (const auto& fit : rd_plot_data(d, flat, orders, 20, 50.0).fits) {
      CHECK(fit.coefficients[0] == doctest::Approx(2.5).epsilon(1e-10));
      for (std::size_t k = 1; k < fit.coefficients.size(); ++k)
        CHECK(std::abs(fit.coefficients[k]) < 1e-10);
    }
    for (const auto& bin : rd_plot_data(d, flat, orders, 20, 50.0).bins)
      CHECK(bin.mean == 2.5);

    for (const auto& fit : rd_plot_data(d, line, orders, 20, 50.0).fits) {
      if (fit.order != 1)
        continue;
      CHECK(fit.coefficients[0] == doctest::Approx(fit.side > 0 ? 1.0 : -2.0).epsilon(1e-10));
      CHECK(fit.coefficients[1] == doctest::Approx(fit.side > 0 ? 0.3 : 0.1).epsilon(1e-10));
    }

    const std::vector<double> few = { -1.0, 1.0 };
    const auto sparse = rd_plot_data(few, few, orders, 20, 50.0);
    CHECK(sparse.bins[5].count == 0);
    CHECK(std::isnan(sparse.bins[5].mean));
    CHECK(std::isnan(sparse.fits[0].coefficients[0]));
  }
}
