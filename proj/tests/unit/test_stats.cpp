#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <algorithm>
#include <cmath>

#include "insider/error.hpp"
#include "insider/rng.hpp"
#include "insider/stats.hpp"

using namespace insider;
using namespace insider::stats;

namespace {

struct WelchCase {
  std::vector<double> a, b;
  double t, p, dof;
};

// Reference values from an independent statistics package (two-sided p).
const std::vector<WelchCase> kWelch = {
    {{1, 2, 3}, {4, 5, 6}, -3.6742346141747673, 0.021311641128756727, 4.0},
    {{1, 2, 3, 4}, {2, 4, 6, 8, 10}, -2.2514363231593695, 0.06913359319239236, 5.520787746170677},
    {{0.5, 0.7, 0.2, 0.9, 1.1}, {0.1, 0.3, 0.2}, 2.882306768491567, 0.03464377847038688, 4.981605688131495},
    {{10, 12, 9, 11, 13, 8}, {7, 6, 9, 5}, 3.2732683535398857, 0.01354962849648655, 7.023121387283238},
    {{1.2, 3.4, 2.2, 5.1}, {1.1, 1.0, 1.3, 0.9, 1.2, 1.05}, 2.239270729229193, 0.1101843013218047, 3.0290302950102195},
    {{0, 0, 1}, {5, 6, 7, 8}, -8.488382153210786, 0.0007241727391364186, 4.349397590361446},
    {{2.5, 2.7, 2.9, 3.1}, {2.4, 2.8, 3.2, 3.6}, -0.6928203230275499, 0.5231770855723348, 4.4117647058823515},
    {{-1, -2, -3, -10}, {1, 2, 3, 10}, -2.7712812921102037, 0.032367622734296025, 6.0},
    {{100, 101, 99, 100.5}, {98, 97.5, 99.5}, 2.4305037014601587, 0.0740589772487199, 3.8712214011933455},
    {{0.023, 0.1, -0.05, 0.2, 0.01}, {0.063, 0.3, 0.15, -0.02, 0.09, 0.11}, -0.9610034504788787, 0.36189832978524383,
     8.911500758426419},
};

struct TQuantile {
  double q, dof, t;
};

// Upper critical values of the t distribution.
const std::vector<TQuantile> kTTable = {
    {0.975, 1, 12.706204736432095}, {0.975, 2, 4.302652729696142},  {0.975, 5, 2.570581835636314},
    {0.975, 10, 2.2281388519649385}, {0.975, 30, 2.0422724563012373}, {0.95, 3, 2.3533634348018264},
    {0.995, 4, 4.604094871415897},  {0.99, 20, 2.527977002740546},  {0.9, 7, 1.4149239276488585},
    {0.999, 2.5, 13.822193110834316},
};

/// Order-statistic interpolation, h = (n - 1) q.
double oracle_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("Welch reference table") {
  for (const auto& c : kWelch) {
    const auto r = welch_t(c.a, c.b);
    CHECK(std::abs(r.t - c.t) <= 1e-6);
    CHECK(std::abs(r.p - c.p) <= 1e-6);
    CHECK(std::abs(r.dof - c.dof) <= 1e-6);
  }
}

TEST_CASE("t distribution CDF reference table") {
  for (const auto& c : kTTable) {
    CAPTURE(c.dof);
    CHECK(std::abs(student_t_cdf(c.t, c.dof) - c.q) <= 1e-6);
    CHECK(std::abs(student_t_cdf(-c.t, c.dof) - (1.0 - c.q)) <= 1e-6);
  }
  CHECK(student_t_cdf(0.0, 3.0) == 0.5);
}

TEST_CASE("t CDF and incomplete beta agree with Boost") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const double dof = rng.uniform(0.5, 200.0);
    const double t = rng.normal(0.0, 4.0);
    const boost::math::students_t dist(dof);
    CHECK(std::abs(student_t_cdf(t, dof) - boost::math::cdf(dist, t)) <= 1e-10);
    const double a = rng.uniform(0.1, 50), b = rng.uniform(0.1, 50), x = rng.uniform();
    CHECK(std::abs(incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) <= 1e-10);
  }
  CHECK_THROWS_AS((void)student_t_cdf(1.0, 0.0), Error);
}

TEST_CASE("Welch examples and errors") {
  const std::vector<double> s{0.1, 0.4, -0.2, 0.3};
  const auto same = welch_t(s, s);
  CHECK(same.t == 0.0);
  CHECK(same.p == doctest::Approx(1.0).epsilon(1e-12));
  try {
    (void)welch_t(std::vector{1.0}, s);
    FAIL("expected test error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::test);
  }
  CHECK_THROWS_AS((void)welch_t(std::vector{2.0, 2.0}, std::vector{3.0, 3.0}), Error);
  // One zero-variance side is allowed.
  CHECK_NOTHROW((void)welch_t(std::vector{2.0, 2.0}, std::vector{3.0, 4.0}));
}

TEST_CASE("property: Welch is antisymmetric") {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(static_cast<std::size_t>(rng.integer(2, 40))), b(static_cast<std::size_t>(rng.integer(2, 40)));
    for (auto& v : a) v = rng.normal(0.05, 0.1);
    for (auto& v : b) v = rng.normal(0.0, 0.3);
    const auto ab = welch_t(a, b), ba = welch_t(b, a);
    CHECK(ab.t == -ba.t);
    CHECK(ab.p == ba.p);
    CHECK(ab.dof == ba.dof);
    CHECK(ab.p >= 0.0);
    CHECK(ab.p <= 1.0);
  }
}

TEST_CASE("winsorize examples") {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = i + 1;
  const auto w = winsorize(v);
  CHECK(*std::min_element(w.begin(), w.end()) == doctest::Approx(1.99).epsilon(1e-14));
  CHECK(*std::max_element(w.begin(), w.end()) == doctest::Approx(99.01).epsilon(1e-14));
  CHECK(w[50] == 51.0);
  const std::vector<double> c(7, 3.25);
  CHECK(winsorize(c) == c);
  CHECK(winsorize(v, 0.0, 1.0) == v);
  CHECK_THROWS_AS((void)winsorize(std::vector<double>{}), Error);
  CHECK_THROWS_AS((void)winsorize(v, 0.5, 0.5), Error);
}

TEST_CASE("property: winsorize matches the interpolated-quantile oracle on integer sequences") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(rng.integer(1, 300)));
    for (auto& x : v) x = static_cast<double>(rng.integer(-1000, 1000));
    const double lq = rng.uniform(0.0, 0.2), uq = rng.uniform(0.8, 1.0);
    const double lo = oracle_quantile(v, lq), hi = oracle_quantile(v, uq);
    const auto w = winsorize(v, lq, uq);
    REQUIRE(w.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(w[i] == std::clamp(v[i], lo, hi));
    CHECK(quantile(v, lq) == lo);
  }
}

TEST_CASE("property: winsorized mean moves toward the median") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(rng.integer(20, 200)));
    for (auto& x : v) x = rng.normal(0.05, 0.1);
    v[0] = rng.uniform(20.0, 100.0) * (trial % 2 ? 1 : -1);  // far beyond the clip and the bulk noise
    const double med = median(v);
    const auto w = winsorize(v);
    CHECK(std::abs(mean(w) - med) <= std::abs(mean(v) - med) + 1e-15);
  }
}

TEST_CASE("moments") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(v) == 5.0);
  CHECK(sample_sd(v) == doctest::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-14));
  CHECK(sample_sd(std::vector{1.0}) == 0.0);
  CHECK(median(v) == 4.5);
  CHECK(quantile(v, 0.0) == 2.0);
  CHECK(quantile(v, 1.0) == 9.0);
  CHECK_THROWS_AS((void)mean(std::vector<double>{}), Error);
  CHECK_THROWS_AS((void)quantile(v, 1.5), Error);
}

}  // TEST_SUITE
