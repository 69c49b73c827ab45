#include <cmath>

#include <doctest.h>

#include "hdaipw/variance_oracle.hpp"

using namespace hdaipw;

namespace {

// Reference values from tests/oracles/variance_oracle.py at the reduced (n=3333, p=233) setting.
struct Reduced {
  static constexpr double v_var = 809.7220199159863;
  static constexpr double v_within = 107.21413716032623;
  static constexpr double v_between = -396.71829851405016;
  static constexpr double sigma_cf = 5.377452198053266;
  static constexpr double f = 14.450496071173953;
  static constexpr double between = -793.4365970281003;
  static constexpr double inv_sigma = 2.005012520859401;
  static constexpr double sigma_classical = 2.0064957118615534;
};

const VarianceReport& reduced_report() {
  static const VarianceReport r = sigma_cf(reference_config(3.0));
  return r;
}

ProblemConfig unequal_config(const std::array<int, 3>& sizes) {
  ProblemConfig c = reference_config(1.0);
  c.n = 3000;
  c.p = 150;
  c.split_sizes = sizes;
  c.gamma = 0.6;
  c.sigma0_beta = 1.0;
  c.sigma1_beta = 0.7;
  c.rho01 = 0.3;
  return c;
}

}  // namespace

TEST_CASE("reduced reference configuration reproduces the independent oracle") {
  const VarianceReport& r = reduced_report();
  const double rel = 1e-7;
  CHECK(r.v_var == doctest::Approx(Reduced::v_var).epsilon(rel));
  CHECK(r.v_within == doctest::Approx(Reduced::v_within).epsilon(rel));
  CHECK(r.v_between == doctest::Approx(Reduced::v_between).epsilon(rel));
  CHECK(r.sigma_cf() == doctest::Approx(Reduced::sigma_cf).epsilon(rel));
  CHECK(r.f_value == doctest::Approx(Reduced::f).epsilon(rel));
  CHECK(r.between_pair_theory == doctest::Approx(Reduced::between).epsilon(rel));
  CHECK(r.constants.inv_sigma == doctest::Approx(Reduced::inv_sigma).epsilon(1e-10));
  CHECK(r.sigma_classical() == doctest::Approx(Reduced::sigma_classical).epsilon(1e-10));
}

TEST_CASE("report identities hold exactly") {
  const VarianceReport& r = reduced_report();
  const ProblemConfig c = reference_config(3.0);
  const double noise = c.sigma_eps0 * c.sigma_eps0 + c.sigma_eps1 * c.sigma_eps1;
  CHECK(r.sigma_cf_sq == r.v_t1 + r.v_t2);
  CHECK(r.f_value * noise + r.v_t2 == doctest::Approx(r.sigma_cf_sq).epsilon(1e-14));
  CHECK(r.v_t2 == v_t2(c));
  CHECK(r.v_t1 >= 0.0);
  CHECK(r.sigma_cf_sq >= r.v_t2);
  CHECK(r.between_pair_theory == doctest::Approx(noise * r.v_between).epsilon(1e-14));
}

TEST_CASE("derived constants are finite with the documented signs") {
  const VarianceReport& r = reduced_report();
  const ProblemConfig c = reference_config(3.0);
  const ScalarConstants& k = r.constants;
  for (int i = 0; i < 3; ++i) {
    CHECK(std::isfinite(k.h[i]));
    CHECK(std::isfinite(k.t[i]));
    CHECK(k.s[i] > 0.0);
    CHECK((k.t[i] > 0.0) == (c.r(i) / 2.0 - c.kappa() > 0.0));
    for (int j = 0; j < 3; ++j) {
      CHECK(std::isfinite(k.f[i][j]));
      CHECK(std::isfinite(k.g[i][j]));
    }
  }
  CHECK(k.max_quadrature_error < 1e-5);
}

TEST_CASE("classical variance at the reference setting") {
  const ProblemConfig c = reference_config(1.0);
  CHECK(std::sqrt(classical_variance(c)) == doctest::Approx(Reduced::sigma_classical).epsilon(1e-10));
}

TEST_CASE("infeasible configurations are rejected") {
  ProblemConfig c = reference_config(3.0);
  c.gamma = 0.0;
  CHECK_THROWS_AS(sigma_cf(c), InfeasibleError);

  ProblemConfig wide = reference_config(1.0);
  wide.n = 3000;
  wide.p = 500;
  wide.split_sizes = equal_splits(wide.n);
  CHECK_THROWS_AS(sigma_cf(wide), InfeasibleError);
}

TEST_CASE("relabeling unequal splits leaves every variance block unchanged") {
  const VarianceReport a = sigma_cf(unequal_config({900, 1000, 1100}));
  const VarianceReport b = sigma_cf(unequal_config({1100, 900, 1000}));
  CHECK(b.v_var == doctest::Approx(a.v_var).epsilon(1e-9));
  CHECK(b.v_within == doctest::Approx(a.v_within).epsilon(1e-9));
  CHECK(b.v_between == doctest::Approx(a.v_between).epsilon(1e-9));
  CHECK(b.v_t2 == doctest::Approx(a.v_t2).epsilon(1e-14));
}

TEST_CASE("report serialization is consistent") {
  const VarianceReport& r = reduced_report();
  CHECK(r.csv_row().size() == VarianceReport::csv_header().size());
  const nlohmann::json j = r.to_json(true);
  CHECK(j.at("sigma_cf").get<double>() == r.sigma_cf());
  CHECK(j.contains("constants"));
  CHECK_FALSE(r.to_json(false).contains("constants"));
}

TEST_CASE("configurations along a kappa grid keep the outcome signal budget") {
  const ProblemConfig t = reference_config(1.0);
  const ProblemConfig c = config_at_kappa(t, 0.02, 0.4);
  CHECK(static_cast<double>(c.p) / c.n == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(c.gamma == 0.4);
  CHECK(c.kappa() * c.sigma0_beta * c.sigma0_beta ==
        doctest::Approx(t.kappa() * t.sigma0_beta * t.sigma0_beta).epsilon(1e-12));
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(config_at_kappa(t, 1.5, 0.4), std::invalid_argument);
}

TEST_CASE("ratio curve marks infeasible points instead of failing") {
  const auto pts = f_ratio_curve(0.4, {0.01, 0.2}, reference_config(1.0));
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].feasible);
  CHECK(pts[0].f_value > pts[0].inv_sigma);
  CHECK(pts[0].log_f_ratio == doctest::Approx(std::log(pts[0].f_value / pts[0].inv_sigma)));
  CHECK_FALSE(pts[1].feasible);
  CHECK_FALSE(pts[1].reason.empty());
}
