#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdaipw/config.hpp"
#include "hdaipw/quadrature.hpp"
#include "hdaipw/state_evolution.hpp"

namespace hdaipw {

/// One Gaussian expectation entering the variance formula, in a form that any
/// integration method can evaluate: E[phi(Z)] with Z ~ N(0, cov).
struct NamedExpectation {
  std::string name;
  Eigen::MatrixXd cov;
  Integrand phi;
};

/// Every expectation of the variance formula at the given configuration. Names are
/// e_gamma_0, inv_sigma, e_shift[j], q_shift[j], s[a], h[a], inv2[a], m[a], k[a], d[a],
/// within[b][c] (b < c), cross[a][c], g[a][c].
std::vector<NamedExpectation> variance_expectations(const ProblemConfig& config, const std::array<SeParams, 3>& se,
                                                 const JointLaw& law);

struct ScalarConstants {
  double e_gamma_0 = 0.0;   // E[z sigmoid(gamma z)]
  double inv_sigma = 0.0;   // E[1 / sigmoid(gamma z)]
  std::array<double, 3> e_shift{};  // e_{gamma, C} at C = -alpha_j gamma
  std::array<double, 3> q_shift{};  // q_{gamma, C} at C = -alpha_j gamma
  std::array<double, 3> s{}, h{}, t{}, inv2{}, m{}, k{}, d{};
  std::array<std::array<double, 3>, 3> within{}, cross{}, g{}, f{};
  /// largest |I(2m) - I(m)| over all expectations (GH) or largest QMC standard error
  double max_quadrature_error = 0.0;
};

/// Evaluates every expectation and the derived constants t_i and f_{i,j}.
/// Throws InfeasibleError when gamma == 0 or some r_b <= 2 kappa.
ScalarConstants scalar_constants(const ProblemConfig& config, const std::array<SeParams, 3>& se, const JointLaw& law,
                                 const QuadOptions& opts = {});

double v_var(const ProblemConfig& config, const std::array<SeParams, 3>& se, const ScalarConstants& c);
double v_within(const ProblemConfig& config, const ScalarConstants& c);
double v_between(const ProblemConfig& config, const std::array<SeParams, 3>& se, const ScalarConstants& c);

/// (kappa/9)(s0^2 + s1^2 - 2 rho s0 s1)(1/r1 + 1/r2 + 1/r3).
double v_t2(const ProblemConfig& config);

/// (sigma0^2 + sigma1^2) E[1/sigmoid(gamma Z)] + kappa (s0^2 + s1^2 - 2 rho s0 s1).
double classical_variance(const ProblemConfig& config, int order = 80);

struct VarianceReport {
  std::array<SeParams, 3> se{};
  ScalarConstants constants;
  double v_var = 0.0;
  double v_within = 0.0;
  double v_between = 0.0;
  double v_t1 = 0.0;
  double v_t2 = 0.0;
  double sigma_cf_sq = 0.0;
  double sigma_classical_sq = 0.0;
  double f_value = 0.0;
  double between_pair_theory = 0.0;

  double sigma_cf() const;
  double sigma_classical() const;
  nlohmann::json to_json(bool with_constants = false) const;
  static std::vector<std::string> csv_header();
  std::vector<double> csv_row() const;
};

/// Theoretical counterpart of the empirical between-pair block: (sigma0^2 + sigma1^2) V_between.
double between_pair_theory(const ProblemConfig& config, const std::array<SeParams, 3>& se, const ScalarConstants& c);

/// Per-split state-evolution parameters for config.ps_method (penalty lambda / r_i for ridge).
std::array<SeParams, 3> split_se_params(const ProblemConfig& config, SeCache* cache = nullptr);

/// Full pipeline: state evolution, joint law, constants and assembly.
VarianceReport sigma_cf(const ProblemConfig& config, SeCache* cache = nullptr, const QuadOptions& opts = {});

struct RatioPoint {
  double kappa = 0.0;
  double gamma = 0.0;
  bool feasible = false;
  std::string reason;  // why an infeasible point was skipped
  double f_value = 0.0;
  double inv_sigma = 0.0;
  double log_f_ratio = 0.0;
  double log_total_ratio = 0.0;
  double between_pair_theory = 0.0;
};

/// f(kappa, gamma^2) against E[1/sigmoid(gamma Z)] along a grid of overall kappa values,
/// holding the template's split fractions; n is chosen so that p = kappa n is integral.
std::vector<RatioPoint> f_ratio_curve(double gamma, const std::vector<double>& kappa_grid,
                                      const ProblemConfig& config_template, SeCache* cache = nullptr,
                                      const QuadOptions& opts = {});

/// Configuration with overall ratio kappa and signal gamma at n = 300000, keeping the template split fractions
/// and its remaining fields; OR signal scales are rescaled so that kappa * sigma_beta^2 is unchanged.
ProblemConfig config_at_kappa(const ProblemConfig& config_template, double kappa, double gamma);

}  // namespace hdaipw
