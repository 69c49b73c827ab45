#pragma once

#include <array>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include <Eigen/Dense>
#include <json.hpp>

namespace hdaipw {

/// Unique t with lambda * sigmoid(t) + t - z = 0.
double prox_rho(double lambda, double z);

/// d prox_rho(lambda, z) / dz = 1 / (1 + lambda sigmoid'(t)).
double prox_rho_derivative(double lambda, double z);

/// State-evolution triple of one split, in that split's own coordinates
/// (dimension ratio kappa_i, penalty lambda / r_i).
struct SeParams {
  double alpha_star = 0.0;
  double sigma_star = 0.0;
  double lambda_star = 0.0;
  double kappa_i = 0.0;
  double gamma = 0.0;
  double ridge_lambda = 0.0;  // split-scaled penalty, 0 for the MLE
  bool is_tilde = false;
  double residual = 0.0;
  int iterations = 0;
};

void to_json(nlohmann::json& j, const SeParams& s);
void from_json(const nlohmann::json& j, SeParams& s);

/// Residuals of the three defining equations at (alpha, sigma, lambda_star):
///   R1 = 1 - lambda_star^2 E[r^2] / (kappa^2 sigma^2)
///   R2 = E[Q1 r] / gamma^2 - ridge_lambda * alpha
///   R3 = 1 - kappa + ridge_lambda * lambda_star - E[1 / (1 + lambda_star sigmoid'(t))]
/// with Q1 = gamma Z1, Q2 = alpha gamma Z1 + sqrt(kappa) sigma Z2, A ~ Bern(sigmoid(Q1)),
/// t = prox(lambda_star, Q2 + lambda_star A) and r = A - sigmoid(t).
std::array<double, 3> se_residual(double kappa, double gamma, double ridge_lambda, double alpha, double sigma,
                                  double lambda_star, int order = 60);

struct SeSolverOptions {
  int order = 60;  // Gauss-Hermite order per axis
  int max_fixed_point_iter = 500;
  double damping = 0.5;
  double tol = 1e-8;
};

/// Logistic MLE system. Throws std::runtime_error naming the last residual on failure.
SeParams solve_se_mle(double kappa_i, double gamma, const SeSolverOptions& opts = {});

/// Ridge system at split-scaled penalty ridge_lambda_scaled = lambda / r_i. Returns the
/// tilde parameters, which are the overlap and noise level of the ridge estimate itself.
SeParams solve_se_ridge(double kappa_i, double gamma, double ridge_lambda_scaled, const SeSolverOptions& opts = {});

/// Dispatches on ridge_lambda (0 = MLE).
SeParams solve_se(double kappa_i, double gamma, double ridge_lambda, const SeSolverOptions& opts = {});

/// Law of (Z_beta, Z_1, Z_2, Z_3) where Z_i is the limit of x' beta_hat of split i.
struct JointLaw {
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();

  /// Sub-covariance of the listed coordinates (0 = Z_beta, i = split i-1 fit).
  Eigen::MatrixXd marginal(std::initializer_list<int> idx) const;
};

JointLaw joint_covariance(const std::array<SeParams, 3>& params, double gamma);

/// Thread-safe memo of solved parameters with optional JSON persistence. Keys match exactly.
class SeCache {
 public:
  SeCache() = default;
  explicit SeCache(std::string path);

  SeParams get(double kappa_i, double gamma, double ridge_lambda, const SeSolverOptions& opts = {});
  void save() const;
  std::size_t size() const;

 private:
  using Key = std::tuple<double, double, double>;
  std::string path_;
  mutable std::mutex mu_;
  std::map<Key, SeParams> entries_;
};

}  // namespace hdaipw
