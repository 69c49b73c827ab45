#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace hdaipw {

/// Gauss-Hermite rule for the standard normal density: E[f(Z)] ~ sum w_i f(x_i).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch rule of the given order; cached per order, thread-safe.
const GaussHermiteRule& gauss_hermite_rule(int order);

/// Integrand over a zero-mean Gaussian vector; receives a pointer to `dim` coordinates.
using Integrand = std::function<double(const double*)>;

enum class QuadMethod { gh, qmc };

struct QuadOptions {
  QuadMethod method = QuadMethod::gh;
  int order = 60;         // GH order per axis for one- and two-dimensional laws
  int max_order = 240;    // adaptive doubling stops here
  int order_3d = 40;      // per-axis order once the law has rank three or more
  int max_order_3d = 160;
  bool adaptive = true;   // double the order until successive values agree
  double rel_tol = 1e-6;  // agreement criterion of the doubling
  long qmc_points = 1L << 19;  // points per randomization
  int qmc_randomizations = 20;
  std::uint64_t qmc_seed = 1;
};

struct Expectation {
  double value = 0.0;
  double std_error = 0.0;  // QMC: spread across random shifts; GH: |I(2m) - I(m)|
  int order = 0;
  long points = 0;
};

/// E[phi(Z)] for Z ~ N(0, cov); cov may be singular (integrates over its range).
Expectation gaussian_expectation(const Eigen::MatrixXd& cov, const Integrand& phi, const QuadOptions& opts = {});

/// Tensor Gauss-Hermite at a fixed order, no adaptivity.
double gh_expectation(const Eigen::MatrixXd& cov, const Integrand& phi, int order);

/// Randomly shifted Sobol points mapped through the normal quantile.
Expectation qmc_expectation(const Eigen::MatrixXd& cov, const Integrand& phi, long points, int randomizations,
                            std::uint64_t seed);

/// One-dimensional E[phi(mean + Z)], Z ~ N(0,1), by Gauss-Hermite.
double gh_expectation_1d(double mean, const std::function<double(double)>& phi, int order = 80);

}  // namespace hdaipw
