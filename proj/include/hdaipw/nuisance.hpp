#pragma once

#include <vector>

#include <Eigen/Dense>

namespace hdaipw {

double sigmoid(double t);
/// log(1 + e^t) without overflow.
double softplus(double t);

struct LogisticOptions {
  double tol = 1e-8;
  int max_iter = 100;
  /// gamma^2 of the generating model if known; enters the divergence threshold.
  double gamma_sq_cap = 1.0;
};

struct LogisticFit {
  Eigen::VectorXd coef;
  bool converged = false;
  bool exists = true;  // only meaningful for lambda == 0
  int iterations = 0;
  double final_grad_norm = 0.0;
  double lambda = 0.0;
  /// mean squared linear predictor, the empirical ||b||^2/n for rows with Var(x_ij) = 1/n
  double predictor_sq = 0.0;
  /// divergence threshold used to declare nonexistence
  double divergence_threshold = 0.0;
};

/// Damped Newton for sum{log(1+e^{x'b}) - A x'b} + (lambda/2)||b||^2 from b = 0.
LogisticFit fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& A, double lambda,
                         const LogisticOptions& opts = {});

struct OlsFit {
  double intercept = 0.0;
  Eigen::VectorXd coef;
  bool unique = false;
  double gram_condition = 0.0;
  int rows_used = 0;
};

/// OLS with intercept on rows whose A equals `arm` (0 or 1).
OlsFit fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
               const Eigen::Ref<const Eigen::VectorXd>& A, int arm);

inline constexpr double kOlsConditionLimit = 1e10;

Eigen::VectorXd predict_propensity(const LogisticFit& fit, const Eigen::Ref<const Eigen::MatrixXd>& X);

Eigen::VectorXd winsorize(const Eigen::Ref<const Eigen::VectorXd>& p, double eps);

/// Mean held-out Bernoulli deviance from a single ridge fit via the leave-one-out
/// identity x_i'b_{-i} = x_i'b - q~_i (A_i - sigma(x_i'b)), q~_i = q_i / (1 - d_i q_i),
/// q_i = x_i'(X'DX + lambda I)^{-1} x_i.
double approx_loo_score(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& A,
                        double lambda);

/// Brute-force leave-one-out deviance (n refits).
double exact_loo_score(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& A,
                       double lambda);

/// Ten log-spaced points in [0.01, 100].
std::vector<double> default_lambda_grid();

/// Index of the smallest score; ties go to the larger lambda.
std::size_t argmin_score(const std::vector<double>& grid, const std::vector<double>& scores);

struct LambdaSelection {
  double lambda = 0.0;
  std::vector<double> scores;
};

LambdaSelection select_lambda_loocv(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                    const Eigen::Ref<const Eigen::VectorXd>& A, const std::vector<double>& grid);

}  // namespace hdaipw
