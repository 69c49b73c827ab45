#include <cmath>
#include <cstdio>
#include <filesystem>

#include <doctest.h>

#include "hdaipw/nuisance.hpp"
#include "hdaipw/rng.hpp"
#include "hdaipw/state_evolution.hpp"

using namespace hdaipw;

namespace {

// Reference solutions from tests/oracles/variance_oracle.py (independent scipy implementation).
constexpr double kMle021g1[3] = {1.3359865619108533, 3.3564457802581043, 1.7751498001292014};
constexpr double kMle021g01[3] = {1.289047540712771, 2.9134108615985337, 1.3837440857403533};
constexpr double kRidge021g1l05[3] = {0.26659784568111217, 0.6218717418951616, 0.2900454450050023};

void check_triple(const SeParams& s, const double (&ref)[3], double rel) {
  CHECK(s.alpha_star == doctest::Approx(ref[0]).epsilon(rel));
  CHECK(s.sigma_star == doctest::Approx(ref[1]).epsilon(rel));
  CHECK(s.lambda_star == doctest::Approx(ref[2]).epsilon(rel));
}

double max_abs(const std::array<double, 3>& r) {
  return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
}

}  // namespace

TEST_CASE("prox with zero penalty is the identity") {
  for (double z : {-50.0, -1.0, 0.0, 2.5, 300.0}) CHECK(prox_rho(0.0, z) == z);
}

TEST_CASE("prox deep in the left tail") {
  CHECK(std::abs(prox_rho(5.0, -40.0) - (-40.0)) <= 1e-10);
}

TEST_CASE("prox residual on random inputs") {
  Rng rng = make_rng(31, "prox");
  std::uniform_real_distribution<double> lam(0.0, 50.0), zz(-60.0, 60.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double l = lam(rng), z = zz(rng);
    const double t = prox_rho(l, z);
    worst = std::max(worst, std::abs(l * sigmoid(t) + t - z));
  }
  CHECK(worst <= 1e-12);
  CHECK_THROWS_AS(prox_rho(-1.0, 0.0), std::invalid_argument);
}

TEST_CASE("prox is increasing with slope in (0, 1]") {
  const double h = 1e-5;
  for (double l : {0.1, 1.0, 10.0}) {
    double prev = prox_rho(l, -30.0);
    for (double z = -29.9; z <= 30.0; z += 0.1) {
      const double t = prox_rho(l, z);
      CHECK(t > prev);
      prev = t;
      const double fd = (prox_rho(l, z + h) - prox_rho(l, z - h)) / (2.0 * h);
      const double d = prox_rho_derivative(l, z);
      CHECK(d > 0.0);
      CHECK(d <= 1.0);
      CHECK(std::abs(fd - d) <= 1e-6);
    }
  }
}

TEST_CASE("MLE state evolution matches the reference solutions") {
  const SeParams a = solve_se_mle(0.21, 1.0);
  check_triple(a, kMle021g1, 1e-8);
  CHECK(a.residual <= 1e-8);
  CHECK_FALSE(a.is_tilde);
  check_triple(solve_se_mle(0.21, 0.1), kMle021g01, 1e-8);
}

TEST_CASE("ridge state evolution matches the reference solution") {
  const SeParams r = solve_se_ridge(0.21, 1.0, 0.5);
  check_triple(r, kRidge021g1l05, 1e-7);
  CHECK(r.is_tilde);
  CHECK(r.ridge_lambda == 0.5);
  CHECK_THROWS_AS(solve_se_ridge(0.21, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("solutions are fixed points of the system") {
  for (double kappa : {0.05, 0.1, 0.21}) {
    for (double gamma : {0.2, 1.0}) {
      const SeParams s = solve_se(kappa, gamma, 0.0);
      CHECK(s.sigma_star > 0.0);
      CHECK(s.lambda_star > 0.0);
      CHECK(max_abs(se_residual(kappa, gamma, 0.0, s.alpha_star, s.sigma_star, s.lambda_star)) <= 1e-8);
    }
  }
  const SeParams r = solve_se(0.1, 0.5, 2.0);
  CHECK(max_abs(se_residual(0.1, 0.5, 2.0, r.alpha_star, r.sigma_star, r.lambda_star)) <= 1e-8);
}

TEST_CASE("solutions are continuous as gamma approaches zero") {
  const SeParams a = solve_se_mle(0.1, 1e-3);
  const SeParams b = solve_se_mle(0.1, 1e-4);
  CHECK(std::abs(b.alpha_star / a.alpha_star - 1.0) <= 0.01);
  CHECK(std::abs(b.sigma_star / a.sigma_star - 1.0) <= 0.01);
  CHECK(std::abs(b.lambda_star / a.lambda_star - 1.0) <= 0.01);
  const SeParams z = solve_se_mle(0.1, 0.0);
  CHECK(z.alpha_star == 0.0);
  CHECK(std::isfinite(z.sigma_star));
}

TEST_CASE("small ridge penalty approaches the MLE") {
  const SeParams m = solve_se_mle(0.21, 1.0);
  const SeParams r = solve_se_ridge(0.21, 1.0, 1e-4);
  CHECK(std::abs(r.alpha_star / m.alpha_star - 1.0) <= 0.01);
  CHECK(std::abs(r.sigma_star / m.sigma_star - 1.0) <= 0.01);
  CHECK(std::abs(r.lambda_star / m.lambda_star - 1.0) <= 0.01);
}

TEST_CASE("ridge shrinkage drives the overlap toward zero") {
  double prev = solve_se_ridge(0.21, 1.0, 1.0).alpha_star;
  for (double lam : {10.0, 100.0}) {
    const double a = solve_se_ridge(0.21, 1.0, lam).alpha_star;
    CHECK(a < prev);
    CHECK(a > 0.0);
    prev = a;
  }
  CHECK(prev < 0.05);
}

TEST_CASE("infeasible MLE configurations report failure") {
  CHECK_THROWS_AS(solve_se_mle(0.6, 1.0), std::runtime_error);
  CHECK_THROWS_AS(solve_se_mle(1.2, 1.0), std::invalid_argument);
}

TEST_CASE("joint covariance follows the displayed pattern") {
  const double gamma = 0.8;
  std::array<SeParams, 3> p{solve_se_mle(0.05, gamma), solve_se_mle(0.1, gamma), solve_se_mle(0.15, gamma)};
  const JointLaw law = joint_covariance(p, gamma);
  const double g2 = gamma * gamma;
  CHECK(law.cov(0, 0) == doctest::Approx(g2));
  for (int i = 0; i < 3; ++i) {
    CHECK(law.cov(0, i + 1) == doctest::Approx(p[i].alpha_star * g2));
    CHECK(law.cov(i + 1, i + 1) ==
          doctest::Approx(p[i].kappa_i * p[i].sigma_star * p[i].sigma_star + p[i].alpha_star * p[i].alpha_star * g2));
    for (int j = 0; j < 3; ++j) {
      if (i != j) CHECK(law.cov(i + 1, j + 1) == doctest::Approx(p[i].alpha_star * p[j].alpha_star * g2));
    }
  }
  CHECK((law.cov - law.cov.transpose()).norm() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(law.cov).eigenvalues().minCoeff() >= -1e-10);
  const Eigen::MatrixXd m = law.marginal({0, 2});
  CHECK(m(0, 1) == law.cov(0, 2));
  CHECK(m(1, 1) == law.cov(2, 2));
}

TEST_CASE("joint covariance at zero signal is diagonal") {
  const SeParams s = solve_se_mle(0.1, 0.0);
  const JointLaw law = joint_covariance({s, s, s}, 0.0);
  Eigen::Matrix4d expect = Eigen::Matrix4d::Zero();
  for (int i = 1; i < 4; ++i) expect(i, i) = 0.1 * s.sigma_star * s.sigma_star;
  CHECK((law.cov - expect).norm() <= 1e-14);
}

TEST_CASE("equal splits give an exchangeable joint law") {
  const SeParams s = solve_se_mle(0.1, 0.5);
  const Eigen::Matrix4d c = joint_covariance({s, s, s}, 0.5).cov;
  CHECK(c(1, 1) == c(2, 2));
  CHECK(c(2, 2) == c(3, 3));
  CHECK(c(1, 2) == c(1, 3));
  CHECK(c(1, 3) == c(2, 3));
  CHECK(c(0, 1) == c(0, 3));
}

TEST_CASE("parameter cache persists solved entries") {
  const std::string path = (std::filesystem::temp_directory_path() / "hdaipw_se_cache_test.json").string();
  std::remove(path.c_str());
  {
    SeCache cache(path);
    const SeParams a = cache.get(0.21, 1.0, 0.0);
    check_triple(a, kMle021g1, 1e-8);
    cache.get(0.21, 1.0, 0.0);
    CHECK(cache.size() == 1);
    cache.save();
  }
  SeCache reloaded(path);
  CHECK(reloaded.size() == 1);
  const SeParams b = reloaded.get(0.21, 1.0, 0.0);
  check_triple(b, kMle021g1, 1e-8);
  CHECK(reloaded.size() == 1);
  std::remove(path.c_str());

  const nlohmann::json j = b;
  const SeParams back = j.get<SeParams>();
  CHECK(back.alpha_star == b.alpha_star);
  CHECK(back.sigma_star == b.sigma_star);
  CHECK(back.lambda_star == b.lambda_star);
}
