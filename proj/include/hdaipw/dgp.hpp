#pragma once

#include <vector>

#include <Eigen/Dense>

#include "hdaipw/config.hpp"
#include "hdaipw/rng.hpp"

namespace hdaipw {

struct SignalSet {
  Eigen::VectorXd beta;   // propensity-score coefficients
  Eigen::VectorXd beta0;  // control-arm outcome coefficients
  Eigen::VectorXd beta1;  // treated-arm outcome coefficients
};

struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd A;  // 0/1 stored as double
  Eigen::VectorXd y;
  std::vector<int> split_of;  // values in {0,1,2}
  std::array<int, 3> split_begin{};
  std::array<int, 3> split_size{};

  int rows() const { return static_cast<int>(X.rows()); }
};

/// Draws beta, beta0, beta1 and rescales them so that ||beta||^2/n = gamma^2,
/// ||beta_t||^2/p = sigma_tbeta^2 and beta0'beta1/p = rho sigma0 sigma1 hold exactly.
SignalSet draw_signals(const ProblemConfig& config, Rng& rng);

/// Draws the n x p covariate matrix (family per config), treatments and outcomes.
Dataset draw_dataset(const ProblemConfig& config, const SignalSet& signals, Rng& rng);

/// Covariate matrix only (rows x p); `n_scale` is the n in Var(x_ij) = 1/n.
Eigen::MatrixXd draw_covariates(CovariateFamily family, int rows, int p, int n_scale, Rng& rng);

/// Allele frequency of column j in the discrete family.
double hwe_frequency(int j, int p);

}  // namespace hdaipw
