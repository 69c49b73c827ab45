#include "hdaipw/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hdaipw {

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

namespace {

void check_binary(const Eigen::Ref<const Eigen::VectorXd>& A, const char* who) {
  for (Eigen::Index i = 0; i < A.size(); ++i) {
    if (A[i] != 0.0 && A[i] != 1.0) throw std::invalid_argument(std::string(who) + ": A must be 0/1");
  }
}

double penalized_loss(const Eigen::VectorXd& eta, const Eigen::Ref<const Eigen::VectorXd>& A,
                      const Eigen::VectorXd& b, double lambda) {
  double f = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) f += softplus(eta[i]) - A[i] * eta[i];
  return f + 0.5 * lambda * b.squaredNorm();
}

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& eta) {
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) mu[i] = sigmoid(eta[i]);
  return mu;
}

}  // namespace

LogisticFit fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& A,
                         double lambda, const LogisticOptions& opts) {
  if (X.rows() != A.size()) throw std::invalid_argument("fit_logistic: rows of X do not match A");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("fit_logistic: tol must be > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("fit_logistic: lambda must be >= 0");
  check_binary(A, "fit_logistic");

  const Eigen::Index n = X.rows(), p = X.cols();
  LogisticFit fit;
  fit.lambda = lambda;
  fit.divergence_threshold = 100.0 * (opts.gamma_sq_cap + 1.0);
  fit.coef = Eigen::VectorXd::Zero(p);

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double f = penalized_loss(eta, A, fit.coef, lambda);
  double prev_predictor_sq = 0.0;
  bool growing = false;

  for (int it = 0; it <= opts.max_iter; ++it) {
    Eigen::VectorXd mu = sigmoid_vec(eta);
    Eigen::VectorXd grad = X.transpose() * (mu - A) + lambda * fit.coef;
    fit.final_grad_norm = grad.lpNorm<Eigen::Infinity>();
    fit.iterations = it;
    if (fit.final_grad_norm <= opts.tol) {
      fit.converged = true;
      break;
    }
    if (it == opts.max_iter) break;

    Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).sqrt();
    Eigen::MatrixXd Xw = X.array().colwise() * w.array();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
    H.selfadjointView<Eigen::Lower>().rankUpdate(Xw.transpose());
    H.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(H.selfadjointView<Eigen::Lower>());
    Eigen::VectorXd step;
    bool newton = llt.info() == Eigen::Success;
    if (newton) {
      step = -llt.solve(grad);
      newton = step.allFinite();
    }
    if (!newton) step = -grad;

    const double slope = grad.dot(step);
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd b_new, eta_new;
    double f_new = f;
    for (int ls = 0; ls < 60; ++ls) {
      b_new = fit.coef + t * step;
      eta_new = X * b_new;
      f_new = penalized_loss(eta_new, A, b_new, lambda);
      if (f_new <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      // near the optimum the decrease drops below rounding of f; accept a full
      // Newton step that does not increase f beyond that level
      if (newton && t == 1.0 && f_new <= f + 1e-14 * std::abs(f)) {
        Eigen::VectorXd g_new = X.transpose() * (sigmoid_vec(eta_new) - A) + lambda * b_new;
        if (g_new.lpNorm<Eigen::Infinity>() < fit.final_grad_norm) {
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) break;
    fit.coef = b_new;
    eta = eta_new;
    f = f_new;

    fit.predictor_sq = eta.squaredNorm() / static_cast<double>(n);
    growing = fit.predictor_sq > prev_predictor_sq;
    prev_predictor_sq = fit.predictor_sq;
    if (lambda == 0.0 && fit.predictor_sq > fit.divergence_threshold) {
      fit.exists = false;
      break;
    }
  }
  fit.predictor_sq = eta.squaredNorm() / static_cast<double>(n);
  if (lambda == 0.0 && !fit.converged && growing) fit.exists = false;
  if (!fit.exists) fit.converged = false;
  return fit;
}

OlsFit fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
               const Eigen::Ref<const Eigen::VectorXd>& A, int arm) {
  if (X.rows() != y.size() || X.rows() != A.size()) throw std::invalid_argument("fit_ols: dimension mismatch");
  if (arm != 0 && arm != 1) throw std::invalid_argument("fit_ols: arm must be 0 or 1");
  const Eigen::Index p = X.cols();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < A.size(); ++i) {
    if (A[i] == static_cast<double>(arm)) rows.push_back(i);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  if (m < 1) throw std::invalid_argument("fit_ols: no selected rows");

  Eigen::MatrixXd D(m, p + 1);
  Eigen::VectorXd ys(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    D(k, 0) = 1.0;
    D.row(k).tail(p) = X.row(rows[k]);
    ys[k] = y[rows[k]];
  }

  OlsFit fit;
  fit.rows_used = static_cast<int>(m);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(p + 1, p + 1);
  G.selfadjointView<Eigen::Lower>().rankUpdate(D.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  fit.gram_condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  fit.unique = m >= p + 1 && fit.gram_condition <= kOlsConditionLimit;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  Eigen::VectorXd theta = qr.solve(ys);
  fit.intercept = theta[0];
  fit.coef = theta.tail(p);
  return fit;
}

Eigen::VectorXd predict_propensity(const LogisticFit& fit, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (!fit.converged) throw std::invalid_argument("predict_propensity: fit did not converge");
  if (X.cols() != fit.coef.size()) throw std::invalid_argument("predict_propensity: dimension mismatch");
  return sigmoid_vec(X * fit.coef);
}

Eigen::VectorXd winsorize(const Eigen::Ref<const Eigen::VectorXd>& p, double eps) {
  if (!(eps >= 0.0 && eps < 0.5)) throw std::invalid_argument("winsorize: eps must lie in [0, 0.5)");
  return p.array().max(eps).min(1.0 - eps);
}

namespace {

double bernoulli_deviance(double eta, double a) {
  // -2 log-likelihood of a under success probability sigmoid(eta)
  return 2.0 * (a == 1.0 ? softplus(-eta) : softplus(eta));
}

LogisticFit ridge_fit_or_throw(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& A,
                               double lambda, const char* who) {
  if (!(lambda > 0.0)) throw std::invalid_argument(std::string(who) + ": lambda must be > 0");
  LogisticFit fit = fit_logistic(X, A, lambda);
  if (!fit.converged) throw std::runtime_error(std::string(who) + ": ridge fit did not converge");
  return fit;
}

}  // namespace

double approx_loo_score(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& A,
                        double lambda) {
  LogisticFit fit = ridge_fit_or_throw(X, A, lambda, "approx_loo_score");
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::VectorXd eta = X * fit.coef;
  Eigen::VectorXd mu = sigmoid_vec(eta);
  Eigen::VectorXd d = mu.array() * (1.0 - mu.array());

  Eigen::MatrixXd Xw = X.array().colwise() * d.array().sqrt();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
  H.selfadjointView<Eigen::Lower>().rankUpdate(Xw.transpose());
  H.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(H.selfadjointView<Eigen::Lower>());
  Eigen::MatrixXd V = llt.matrixL().solve(X.transpose());

  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q = V.col(i).squaredNorm();
    const double q_loo = q / (1.0 - d[i] * q);
    const double eta_loo = eta[i] - q_loo * (A[i] - mu[i]);
    total += bernoulli_deviance(eta_loo, A[i]);
  }
  return total / static_cast<double>(n);
}

double exact_loo_score(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& A,
                       double lambda) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (n < 2) throw std::invalid_argument("exact_loo_score: need at least two rows");
  double total = 0.0;
  Eigen::MatrixXd Xi(n - 1, p);
  Eigen::VectorXd Ai(n - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    Xi.topRows(i) = X.topRows(i);
    Xi.bottomRows(n - 1 - i) = X.bottomRows(n - 1 - i);
    Ai.head(i) = A.head(i);
    Ai.tail(n - 1 - i) = A.tail(n - 1 - i);
    LogisticFit fit = ridge_fit_or_throw(Xi, Ai, lambda, "exact_loo_score");
    total += bernoulli_deviance(X.row(i).dot(fit.coef), A[i]);
  }
  return total / static_cast<double>(n);
}

std::vector<double> default_lambda_grid() {
  std::vector<double> g(10);
  for (int k = 0; k < 10; ++k) g[k] = std::pow(10.0, -2.0 + 4.0 * k / 9.0);
  return g;
}

std::size_t argmin_score(const std::vector<double>& grid, const std::vector<double>& scores) {
  if (grid.empty() || grid.size() != scores.size()) throw std::invalid_argument("argmin_score: bad sizes");
  std::size_t best = grid.size();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!std::isfinite(scores[k])) continue;
    if (best == grid.size() || scores[k] < scores[best] || (scores[k] == scores[best] && grid[k] > grid[best])) {
      best = k;
    }
  }
  if (best == grid.size()) throw std::runtime_error("argmin_score: every fit failed");
  return best;
}

LambdaSelection select_lambda_loocv(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                    const Eigen::Ref<const Eigen::VectorXd>& A, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("select_lambda_loocv: empty grid");
  LambdaSelection sel;
  for (double lam : grid) {
    double s = std::numeric_limits<double>::quiet_NaN();
    try {
      s = approx_loo_score(X, A, lam);
    } catch (const std::runtime_error&) {
    }
    sel.scores.push_back(s);
  }
  sel.lambda = grid[argmin_score(grid, sel.scores)];
  return sel;
}

}  // namespace hdaipw
