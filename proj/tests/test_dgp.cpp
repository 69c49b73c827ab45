#include <cmath>
#include <set>

#include <doctest.h>

#include "hdaipw/config.hpp"
#include "hdaipw/dgp.hpp"
#include "hdaipw/rng.hpp"

using namespace hdaipw;

namespace {

ProblemConfig small_config() {
  ProblemConfig c = reference_config(1.0);
  c.n = 600;
  c.p = 40;
  c.split_sizes = equal_splits(c.n);
  c.gamma = 0.7;
  c.sigma0_beta = 1.3;
  c.sigma1_beta = 0.8;
  c.rho01 = -0.35;
  return c;
}

}  // namespace

TEST_CASE("signal norms are exact after rescaling") {
  ProblemConfig c = reference_config(1.0);
  Rng rng = make_rng(7, "signals");
  const SignalSet s = draw_signals(c, rng);
  CHECK(s.beta.squaredNorm() == doctest::Approx(100.0).epsilon(1e-13));
  const double p = c.p;
  CHECK(s.beta0.squaredNorm() / p == doctest::Approx(c.sigma0_beta * c.sigma0_beta).epsilon(1e-12));
  CHECK(s.beta1.squaredNorm() / p == doctest::Approx(c.sigma1_beta * c.sigma1_beta).epsilon(1e-12));
  CHECK(s.beta0.dot(s.beta1) / p == doctest::Approx(c.rho01 * c.sigma0_beta * c.sigma1_beta).epsilon(1e-12));
}

TEST_CASE("signal norms hold with unequal scales and negative correlation") {
  const ProblemConfig c = small_config();
  Rng rng = make_rng(11, "signals");
  const SignalSet s = draw_signals(c, rng);
  CHECK(s.beta.squaredNorm() / c.n == doctest::Approx(c.gamma * c.gamma).epsilon(1e-12));
  CHECK(s.beta0.squaredNorm() / c.p == doctest::Approx(1.69).epsilon(1e-12));
  CHECK(s.beta1.squaredNorm() / c.p == doctest::Approx(0.64).epsilon(1e-12));
  CHECK(s.beta0.dot(s.beta1) / c.p == doctest::Approx(-0.35 * 1.3 * 0.8).epsilon(1e-12));
}

TEST_CASE("perfectly correlated equal-scale OR signals coincide") {
  ProblemConfig c = small_config();
  c.sigma1_beta = c.sigma0_beta;
  c.rho01 = 1.0;
  Rng rng = make_rng(3, "signals");
  const SignalSet s = draw_signals(c, rng);
  CHECK((s.beta0 - s.beta1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero signal strengths give zero vectors") {
  ProblemConfig c = small_config();
  c.gamma = 0.0;
  c.sigma0_beta = 0.0;
  Rng rng = make_rng(3, "signals");
  const SignalSet s = draw_signals(c, rng);
  CHECK(s.beta.norm() == 0.0);
  CHECK(s.beta0.norm() == 0.0);
  CHECK(s.beta1.squaredNorm() / c.p == doctest::Approx(0.64).epsilon(1e-12));
}

TEST_CASE("draws are deterministic in the seed") {
  const ProblemConfig c = small_config();
  Rng r1 = make_rng(5, "signals"), r2 = make_rng(5, "signals");
  const SignalSet a = draw_signals(c, r1), b = draw_signals(c, r2);
  CHECK(a.beta == b.beta);
  CHECK(a.beta0 == b.beta0);
  CHECK(a.beta1 == b.beta1);
  Rng d1 = make_rng(5, "data", 2), d2 = make_rng(5, "data", 2);
  const Dataset x = draw_dataset(c, a, d1), y = draw_dataset(c, a, d2);
  CHECK(x.X == y.X);
  CHECK(x.A == y.A);
  CHECK(x.y == y.y);
}

TEST_CASE("derived seeds separate streams and indices") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 100; ++i) {
    seen.insert(derive_seed(1, "data", i));
    seen.insert(derive_seed(1, "signals", i));
    seen.insert(derive_seed(2, "data", i));
  }
  CHECK(seen.size() == 300);
}

TEST_CASE("split assignment is contiguous and matches split sizes") {
  ProblemConfig c = small_config();
  c.split_sizes = {150, 200, 250};
  Rng rng = make_rng(1, "signals");
  const SignalSet s = draw_signals(c, rng);
  const Dataset d = draw_dataset(c, s, rng);
  REQUIRE(d.rows() == 600);
  std::array<int, 3> counts{};
  for (int i = 0; i < d.rows(); ++i) {
    const int k = d.split_of[i];
    REQUIRE(k >= 0);
    REQUIRE(k < 3);
    ++counts[k];
    CHECK(i >= d.split_begin[k]);
    CHECK(i < d.split_begin[k] + d.split_size[k]);
  }
  CHECK(counts == std::array<int, 3>{150, 200, 250});
  for (int i = 0; i < d.rows(); ++i) {
    CHECK((d.A[i] == 0.0 || d.A[i] == 1.0));
    CHECK(std::isfinite(d.y[i]));
  }
}

TEST_CASE("outcomes follow the arm-specific linear model") {
  ProblemConfig c = small_config();
  c.sigma_eps0 = c.sigma_eps1 = 1e-300;
  Rng rng = make_rng(2, "signals");
  const SignalSet s = draw_signals(c, rng);
  const Dataset d = draw_dataset(c, s, rng);
  for (int i = 0; i < d.rows(); ++i) {
    const double mean = d.A[i] == 1.0 ? c.alpha1 + d.X.row(i).dot(s.beta1) : c.alpha0 + d.X.row(i).dot(s.beta0);
    CHECK(d.y[i] == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("treatment probability is one half") {
  ProblemConfig c;
  c.n = 1000000;
  c.p = 2;
  c.split_sizes = equal_splits(c.n);
  c.gamma = 1.0;
  c.sigma0_beta = c.sigma1_beta = 1.0;
  Rng rng = make_rng(99, "signals");
  const SignalSet s = draw_signals(c, rng);
  const Dataset d = draw_dataset(c, s, rng);
  CHECK(std::abs(d.A.mean() - 0.5) <= 0.002);
}

TEST_CASE("every covariate family has mean zero and variance 1/n") {
  const int rows = 200000, p = 6, n = 50;
  for (CovariateFamily fam : {CovariateFamily::gaussian, CovariateFamily::uniform, CovariateFamily::hwe_discrete}) {
    Rng rng = make_rng(17, "covariates", static_cast<std::uint64_t>(fam));
    const Eigen::MatrixXd X = draw_covariates(fam, rows, p, n, rng);
    for (int j = 0; j < p; ++j) {
      const Eigen::ArrayXd col = X.col(j).array() * std::sqrt(static_cast<double>(n));
      const double mean = col.mean();
      const double var = (col - mean).square().sum() / (rows - 1);
      const double m4 = (col - mean).pow(4).mean();
      CHECK(std::abs(mean) <= 4.0 / std::sqrt(static_cast<double>(rows)));
      CHECK(std::abs(var - 1.0) <= 4.0 * std::sqrt((m4 - 1.0) / rows));
    }
  }
}

TEST_CASE("discrete family uses three levels and distinct frequencies in [0.25, 0.75]") {
  const int p = 9;
  std::set<double> freqs;
  for (int j = 0; j < p; ++j) {
    const double f = hwe_frequency(j, p);
    CHECK(f >= 0.25);
    CHECK(f <= 0.75);
    freqs.insert(f);
  }
  CHECK(freqs.size() == static_cast<std::size_t>(p));
  CHECK(hwe_frequency(0, p) == 0.25);
  CHECK(hwe_frequency(p - 1, p) == 0.75);
  Rng rng = make_rng(4, "covariates");
  const Eigen::MatrixXd X = draw_covariates(CovariateFamily::hwe_discrete, 2000, p, 100, rng);
  for (int j = 0; j < p; ++j) {
    std::set<double> levels(X.col(j).data(), X.col(j).data() + X.rows());
    CHECK(levels.size() <= 3);
  }
}

TEST_CASE("uniform family is bounded by sqrt(3/n)") {
  Rng rng = make_rng(4, "covariates");
  const Eigen::MatrixXd X = draw_covariates(CovariateFamily::uniform, 1000, 10, 300, rng);
  CHECK(X.cwiseAbs().maxCoeff() <= std::sqrt(3.0 / 300.0));
}

TEST_CASE("config validation and JSON round trip") {
  ProblemConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  const nlohmann::json j = c;
  const ProblemConfig back = j.get<ProblemConfig>();
  CHECK(back.n == c.n);
  CHECK(back.split_sizes == c.split_sizes);
  CHECK(back.rho01 == c.rho01);
  CHECK(back.ps_method.to_string() == c.ps_method.to_string());

  ProblemConfig bad = c;
  bad.split_sizes = {100, 100, 100};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.rho01 = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.split_sizes = {520, 40, 40};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"bogus", 1}}, c), std::invalid_argument);
  const ProblemConfig partial = config_from_json(nlohmann::json{{"n", 900}, {"ps_method", "ridge(0.5)"}}, c);
  CHECK(partial.n == 900);
  CHECK(partial.split_sizes == std::array<int, 3>{300, 300, 300});
  CHECK(partial.ps_method.penalty() == 0.5);
  CHECK(partial.p == c.p);
}

TEST_CASE("reference configuration matches the documented setting") {
  const ProblemConfig c = reference_config(1.0);
  CHECK(c.n == 10000);
  CHECK(c.p == 700);
  CHECK(c.gamma == 0.1);
  CHECK(c.sigma0_beta == doctest::Approx(0.1 / std::sqrt(0.07)));
  CHECK(c.rho01 == 0.2);
  CHECK(c.ate() == 2.0);
  CHECK(c.winsor_eps == 0.005);
  const ProblemConfig r = reference_config(3.0);
  CHECK(r.n == 3333);
  CHECK(r.p == 233);
  CHECK(r.split_sizes == std::array<int, 3>{1111, 1111, 1111});
}
