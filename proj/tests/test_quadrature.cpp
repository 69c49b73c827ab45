#include <cmath>
#include <limits>

#include <doctest.h>

#include "hdaipw/nuisance.hpp"
#include "hdaipw/quadrature.hpp"

using namespace hdaipw;

TEST_CASE("Gauss-Hermite rule integrates Gaussian moments exactly") {
  for (int order : {5, 20, 60}) {
    const GaussHermiteRule& rule = gauss_hermite_rule(order);
    REQUIRE(rule.nodes.size() == static_cast<std::size_t>(order));
    double w = 0.0, m2 = 0.0, m4 = 0.0, m6 = 0.0, m1 = 0.0;
    for (int i = 0; i < order; ++i) {
      const double x = rule.nodes[i];
      w += rule.weights[i];
      m1 += rule.weights[i] * x;
      m2 += rule.weights[i] * x * x;
      m4 += rule.weights[i] * std::pow(x, 4);
      m6 += rule.weights[i] * std::pow(x, 6);
    }
    CHECK(w == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(m1) <= 1e-13);
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
    if (order >= 4) CHECK(m6 == doctest::Approx(15.0).epsilon(1e-11));
  }
  CHECK(&gauss_hermite_rule(33) == &gauss_hermite_rule(33));
  CHECK_THROWS(gauss_hermite_rule(0));
}

TEST_CASE("z squared times a sigmoid has expectation one half") {
  for (double gamma : {0.1, 1.0, 5.0, 20.0}) {
    const double v = gh_expectation_1d(0.0, [gamma](double z) { return z * z * sigmoid(gamma * z); });
    CHECK(std::abs(v - 0.5) <= 1e-8);
  }
}

TEST_CASE("one-dimensional shifted expectation") {
  const double v = gh_expectation_1d(0.7, [](double z) { return std::exp(z); });
  CHECK(v == doctest::Approx(std::exp(0.7 + 0.5)).epsilon(1e-12));
}

TEST_CASE("second and fourth moments under a correlated law") {
  Eigen::Matrix3d cov;
  cov << 2.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 0.5;
  const Expectation e01 = gaussian_expectation(cov, [](const double* z) { return z[0] * z[1]; });
  CHECK(e01.value == doctest::Approx(0.6).epsilon(1e-12));
  const Expectation e4 = gaussian_expectation(cov, [](const double* z) { return z[0] * z[0] * z[2] * z[2]; });
  CHECK(e4.value == doctest::Approx(2.0 * 0.5 + 2.0 * 0.09).epsilon(1e-12));
  CHECK(e4.order >= 40);
}

TEST_CASE("singular covariances integrate over their range") {
  Eigen::Matrix2d cov;
  cov << 1.0, 2.0, 2.0, 4.0;
  const Expectation e = gaussian_expectation(cov, [](const double* z) { return z[0] * z[1]; });
  CHECK(e.value == doctest::Approx(2.0).epsilon(1e-12));
  Eigen::Matrix2d zero = Eigen::Matrix2d::Zero();
  const Expectation c = gaussian_expectation(zero, [](const double* z) { return 3.0 + z[0] + z[1]; });
  CHECK(c.value == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("invalid laws and integrands are rejected") {
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(gaussian_expectation(bad, [](const double*) { return 1.0; }), std::invalid_argument);
  Eigen::Matrix2d ok = Eigen::Matrix2d::Identity();
  CHECK_THROWS_AS(
      gaussian_expectation(ok, [](const double*) { return std::numeric_limits<double>::quiet_NaN(); }),
      std::runtime_error);
}

TEST_CASE("adaptive doubling reaches the requested tolerance on a smooth kernel") {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.3, 0.3, 2.0;
  const Integrand phi = [](const double* z) { return sigmoid(3.0 * z[0] - z[1]) * std::cos(z[1]); };
  const Expectation e = gaussian_expectation(cov, phi);
  const double fine = gh_expectation(cov, phi, 240);
  CHECK(std::abs(e.value - fine) <= 1e-6 * std::abs(fine) + 1e-13);
}

TEST_CASE("QMC agrees with Gauss-Hermite within its standard error") {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.5, 0.5, 1.5;
  const Integrand phi = [](const double* z) { return sigmoid(z[0] + z[1]) * z[0] * z[0]; };
  const double gh = gh_expectation(cov, phi, 120);
  const Expectation q = qmc_expectation(cov, phi, 1L << 14, 16, 5);
  CHECK(q.std_error > 0.0);
  CHECK(std::abs(q.value - gh) <= 3.0 * q.std_error + 1e-12);
  const Expectation again = qmc_expectation(cov, phi, 1L << 14, 16, 5);
  CHECK(again.value == q.value);

  QuadOptions opts;
  opts.method = QuadMethod::qmc;
  opts.qmc_points = 1L << 12;
  opts.qmc_randomizations = 8;
  const Expectation via = gaussian_expectation(cov, phi, opts);
  CHECK(std::abs(via.value - gh) <= 3.0 * via.std_error + 1e-12);
}
