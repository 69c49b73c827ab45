#include "hdaipw/dgp.hpp"

#include <cmath>
#include <stdexcept>

namespace hdaipw {

namespace {

double sigmoid(double t) {
  return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

Eigen::VectorXd gaussian_vector(int p, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v(p);
  for (int j = 0; j < p; ++j) v[j] = nd(rng);
  return v;
}

}  // namespace

SignalSet draw_signals(const ProblemConfig& config, Rng& rng) {
  const int p = config.p;
  if (p < 1) throw std::invalid_argument("draw_signals: p must be >= 1");
  SignalSet s;

  s.beta = gaussian_vector(p, rng);
  if (config.gamma == 0.0) {
    s.beta.setZero();
  } else {
    s.beta *= config.gamma * std::sqrt(static_cast<double>(config.n)) / s.beta.norm();
  }

  Eigen::MatrixXd U(p, 2);
  U.col(0) = gaussian_vector(p, rng);
  U.col(1) = gaussian_vector(p, rng);

  // [beta0 beta1] = U M with M' (U'U/p) M = T, M = L_G^{-T} L_T'.
  const double s0 = config.sigma0_beta, s1 = config.sigma1_beta, rho = config.rho01;
  Eigen::Matrix2d LT;
  LT << s0, 0.0, rho * s1, s1 * std::sqrt(std::max(0.0, 1.0 - rho * rho));
  Eigen::Matrix2d G = U.transpose() * U / static_cast<double>(p);
  Eigen::LLT<Eigen::Matrix2d> llt(G);
  if (llt.info() != Eigen::Success) throw std::runtime_error("draw_signals: degenerate draw");
  Eigen::Matrix2d LG = llt.matrixL();
  Eigen::Matrix2d M = LG.transpose().triangularView<Eigen::Upper>().solve(LT.transpose());
  Eigen::MatrixXd B = U * M;
  s.beta0 = B.col(0);
  s.beta1 = B.col(1);
  return s;
}

double hwe_frequency(int j, int p) {
  if (p == 1) return 0.5;
  return 0.25 + 0.5 * static_cast<double>(j) / static_cast<double>(p - 1);
}

Eigen::MatrixXd draw_covariates(CovariateFamily family, int rows, int p, int n_scale, Rng& rng) {
  Eigen::MatrixXd X(rows, p);
  const double sd = 1.0 / std::sqrt(static_cast<double>(n_scale));
  switch (family) {
    case CovariateFamily::gaussian: {
      std::normal_distribution<double> nd(0.0, sd);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = nd(rng);
      break;
    }
    case CovariateFamily::uniform: {
      const double half = std::sqrt(3.0) * sd;
      std::uniform_real_distribution<double> ud(-half, half);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = ud(rng);
      break;
    }
    case CovariateFamily::hwe_discrete: {
      // value 0 w.p. f^2, 1 w.p. 2f(1-f), 2 w.p. (1-f)^2, standardized with population moments
      std::uniform_real_distribution<double> ud(0.0, 1.0);
      std::vector<double> f(p), mean(p), scale(p);
      for (int j = 0; j < p; ++j) {
        f[j] = hwe_frequency(j, p);
        mean[j] = 2.0 * (1.0 - f[j]);
        scale[j] = sd / std::sqrt(2.0 * f[j] * (1.0 - f[j]));
      }
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < p; ++j) {
          double u = ud(rng);
          double v = u < f[j] * f[j] ? 0.0 : (u < 1.0 - (1.0 - f[j]) * (1.0 - f[j]) ? 1.0 : 2.0);
          X(i, j) = (v - mean[j]) * scale[j];
        }
      }
      break;
    }
  }
  return X;
}

Dataset draw_dataset(const ProblemConfig& config, const SignalSet& signals, Rng& rng) {
  config.validate();
  if (signals.beta.size() != config.p || signals.beta0.size() != config.p ||
      signals.beta1.size() != config.p) {
    throw std::invalid_argument("draw_dataset: signal dimension does not match p");
  }
  Dataset d;
  const int n = config.n;
  d.X = draw_covariates(config.covariate_family, n, config.p, n, rng);
  Eigen::VectorXd eta = d.X * signals.beta;
  Eigen::VectorXd m0 = d.X * signals.beta0;
  Eigen::VectorXd m1 = d.X * signals.beta1;
  d.A.resize(n);
  d.y.resize(n);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const bool treated = ud(rng) < sigmoid(eta[i]);
    const double eps = nd(rng);
    d.A[i] = treated ? 1.0 : 0.0;
    d.y[i] = treated ? config.alpha1 + m1[i] + config.sigma_eps1 * eps
                     : config.alpha0 + m0[i] + config.sigma_eps0 * eps;
  }
  d.split_of.resize(n);
  for (int s = 0; s < 3; ++s) {
    d.split_begin[s] = config.split_begin(s);
    d.split_size[s] = config.split_sizes[s];
    for (int i = 0; i < d.split_size[s]; ++i) d.split_of[d.split_begin[s] + i] = s;
  }
  return d;
}

}  // namespace hdaipw
