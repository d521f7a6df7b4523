#include "crtb/numkernel.hpp"

#include "crtb/rng.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace crtb;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("median follows the lower-midpoint convention") {
  CHECK(median(vec({3.0})) == 3.0);
  CHECK(median(vec({1.0, 3.0, 2.0})) == 2.0);
  CHECK(median(vec({1.0, 2.0, 3.0, 4.0})) == 2.5);
  CHECK(median(vec({4.0, 1.0, 3.0, 2.0})) == 2.5);
  CHECK(median(vec({2.0, 2.0, 2.0, 2.0})) == 2.0);
  CHECK_THROWS_AS(median(Vector()), InvalidInputError);
  CHECK_THROWS_AS(median(vec({1.0, std::nan("")})), InvalidInputError);
}

TEST_CASE("mad matches the hand value and is 0 for constant input") {
  // (1..5): median 3, |dev| = (2,1,0,1,2), median deviation 1.
  CHECK(mad(vec({1.0, 2.0, 3.0, 4.0, 5.0})) == doctest::Approx(1.4826).epsilon(1e-12));
  CHECK(mad(vec({7.0, 7.0, 7.0})) == 0.0);
}

TEST_CASE("mad is translation invariant and scale equivariant") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    Vector v(31);
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    const double base = mad(v);
    CHECK(mad(v.array() + 5.5) == doctest::Approx(base).epsilon(1e-12));
    CHECK(mad(v * -2.0) == doctest::Approx(2.0 * base).epsilon(1e-12));
  }
}

TEST_CASE("weighted_median picks the lower weighted median") {
  CHECK(weighted_median(vec({1.0, 2.0, 3.0}), vec({1.0, 1.0, 1.0})) == 2.0);
  CHECK(weighted_median(vec({1.0, 2.0, 3.0}), vec({0.0, 0.0, 1.0})) == 3.0);
  CHECK(weighted_median(vec({10.0, 1.0, 2.0}), vec({0.1, 1.0, 1.0})) == 2.0);
  // Equals the plain median convention's lower order statistic under
  // uniform weights with even n.
  CHECK(weighted_median(vec({4.0, 1.0, 3.0, 2.0}), Vector::Ones(4)) == 2.0);
  CHECK_THROWS_AS(weighted_median(vec({1.0}), vec({0.0})), InvalidInputError);
  CHECK_THROWS_AS(weighted_median(vec({1.0, 2.0}), vec({1.0, -1.0})),
                  InvalidInputError);
}

TEST_CASE("weighted_median is insensitive to zero-weight outliers") {
  Rng rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    Vector v(21), w(21);
    for (Index i = 0; i < v.size(); ++i) {
      v[i] = rng.normal();
      w[i] = rng.uniform01() + 0.1;
    }
    const double base = weighted_median(v, w);
    Vector v2(22), w2(22);
    v2 << v, 1e9;
    w2 << w, 0.0;
    CHECK(weighted_median(v2, w2) == base);
  }
}

TEST_CASE("tau2_scale is consistent at the normal model") {
  // Consistency constant oracle: E[min(Z^2, 9)] by numerical integration.
  const double kappa = testutil::simpson(
      [](double z) {
        return std::min(z * z, 9.0) * std::exp(-0.5 * z * z) /
               std::sqrt(2.0 * 3.14159265358979323846);
      },
      -10.0, 10.0, 4000);
  CHECK(kappa == doctest::Approx(0.9950072780).epsilon(1e-8));

  Rng rng(21);
  Vector v(100000);
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  CHECK(tau2_scale(v) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("tau2_scale truncates a wild outlier") {
  Rng rng(22);
  Vector v(501);
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  const double clean = tau2_scale(v);
  Vector spiked = v;
  spiked[17] = 1e6;
  CHECK(tau2_scale(spiked) == doctest::Approx(clean).epsilon(0.10));
  CHECK_THROWS_AS(tau2_scale(vec({5.0, 5.0, 5.0})), DegenerateDataError);
}

TEST_CASE("normal_quantile hits reference values") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normal_quantile(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-10));
  CHECK(normal_quantile(0.995) ==
        doctest::Approx(2.5758293035489004).epsilon(1e-10));
  CHECK(normal_quantile(0.75) ==
        doctest::Approx(0.6744897501960817).epsilon(1e-10));
  CHECK_THROWS_AS(normal_quantile(0.0), InvalidInputError);
  CHECK_THROWS_AS(normal_quantile(1.0), InvalidInputError);
}

TEST_CASE("normal_quantile is antisymmetric and inverts the CDF") {
  for (double p : {1e-9, 1e-4, 0.01, 0.3, 0.77, 0.999, 1.0 - 1e-9}) {
    const double x = normal_quantile(p);
    CHECK(normal_quantile(1.0 - p) == doctest::Approx(-x).epsilon(1e-8));
    const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
    CHECK(cdf == doctest::Approx(p).epsilon(1e-8));
  }
}

TEST_CASE("chi2_quantile matches closed forms") {
  // df = 2 is exponential: quantile is -2 log(1-p).
  for (double p : {0.01, 0.25, 0.5, 0.9, 0.95, 0.999}) {
    CHECK(chi2_quantile(p, 2) ==
          doctest::Approx(-2.0 * std::log1p(-p)).epsilon(1e-10));
  }
  CHECK(chi2_quantile(0.5, 2) ==
        doctest::Approx(1.3862943611198906).epsilon(1e-10));
  CHECK(chi2_quantile(0.95, 3) ==
        doctest::Approx(7.814727903251179).epsilon(1e-8));
  // df = 1: the median equals the squared third-quartile normal quantile.
  const double z75 = normal_quantile(0.75);
  CHECK(chi2_quantile(0.5, 1) == doctest::Approx(z75 * z75).epsilon(1e-8));
  CHECK_THROWS_AS(chi2_quantile(0.5, 0), InvalidInputError);
  CHECK_THROWS_AS(chi2_quantile(1.0, 3), InvalidInputError);
}

TEST_CASE("chi2_quantile agrees with a bisection oracle for even df") {
  for (int df : {2, 4, 6, 10}) {
    for (double p : {0.05, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99}) {
      const double oracle = testutil::chi2_quantile_even_df(p, df);
      CHECK(chi2_quantile(p, df) == doctest::Approx(oracle).epsilon(1e-8));
    }
  }
}

TEST_CASE("chi2_quantile is monotone in p and df") {
  for (int df : {1, 3, 7}) {
    double prev = 0.0;
    for (double p = 0.05; p < 1.0; p += 0.05) {
      const double q = chi2_quantile(p, df);
      CHECK(q > prev);
      prev = q;
    }
  }
  CHECK(chi2_quantile(0.9, 5) > chi2_quantile(0.9, 4));
}

TEST_CASE("svd_leading matches a power-iteration oracle") {
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix m = rng.normal_matrix(6, 4);
    const SvdTriple got = svd_leading(m);
    const testutil::PowerSvd want = testutil::power_svd(m);
    CHECK(got.s == doctest::Approx(want.s).epsilon(1e-10));
    CHECK((got.u - want.u).norm() < 1e-7);
    CHECK((got.v - want.v).norm() < 1e-7);
    // Contract: the triple reproduces M v = s u and s is the top value.
    CHECK((m * got.v - got.s * got.u).norm() <= 1e-10 * got.s);
    CHECK(got.s * got.s <= m.squaredNorm() * (1.0 + 1e-12));
    CHECK(got.u.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(got.v.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("svd_leading sign convention is deterministic") {
  // Rank-1 with a sign tie in u: the first largest-magnitude entry wins.
  Vector u(2), v(3);
  u << 1.0, -1.0;
  v << 1.0, 2.0, 2.0;
  const Matrix m = u * v.transpose();
  const SvdTriple got = svd_leading(m);
  CHECK(got.u[0] > 0.0);
  CHECK(got.u[1] < 0.0);
  // Negating the matrix flips v but keeps the u convention.
  const SvdTriple neg = svd_leading(-m);
  CHECK(neg.u[0] > 0.0);
  CHECK((got.v + neg.v).norm() < 1e-12);

  CHECK_THROWS_AS(svd_leading(Matrix::Zero(3, 2)), DegenerateDataError);
}
