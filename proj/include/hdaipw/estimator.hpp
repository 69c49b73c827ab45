#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "hdaipw/config.hpp"
#include "hdaipw/dgp.hpp"
#include "hdaipw/nuisance.hpp"

namespace hdaipw {

using Perm = std::array<int, 3>;  // (a, b, c): PS split, OR split, evaluation split

/// The six permutations in lexicographic order.
const std::array<Perm, 6>& all_perms();
int perm_index(const Perm& perm);

struct PreCrossFit {
  Perm perm{0, 1, 2};
  double delta1 = 0.0;
  double delta0 = 0.0;
  double delta = 0.0;
  bool ps_exists = true;
  bool or_unique = true;
};

struct CrossFitResult {
  std::array<PreCrossFit, 6> prefits{};
  double delta_cf = 0.0;
  bool valid = false;
  int failing_perm = -1;  // index into all_perms() of the first infeasible permutation
};

/// AIPW arm means on evaluation rows given (already winsorized) propensities
/// and outcome-regression predictions: returns {delta1, delta0}.
std::array<double, 2> aipw_arm_means(const Eigen::Ref<const Eigen::VectorXd>& A,
                                     const Eigen::Ref<const Eigen::VectorXd>& y,
                                     const Eigen::Ref<const Eigen::VectorXd>& ps,
                                     const Eigen::Ref<const Eigen::VectorXd>& m1,
                                     const Eigen::Ref<const Eigen::VectorXd>& m0);

/// Nuisances fitted on one split: PS fit and both OR fits.
struct SplitNuisance {
  LogisticFit ps;
  OlsFit or1;
  OlsFit or0;
};

SplitNuisance fit_split_nuisance(const Dataset& data, int split, const ProblemConfig& config);

/// Single pre-cross-fit estimate with its own nuisance fits.
PreCrossFit aipw_prefit(const Dataset& data, const Perm& perm, const ProblemConfig& config);

/// Fits each split's nuisances once and evaluates the six permutations.
CrossFitResult crossfit_aipw(const Dataset& data, const ProblemConfig& config);

/// Same fitted nuisances evaluated at several winsorization levels (one result per level).
std::vector<CrossFitResult> crossfit_aipw_multi(const Dataset& data, const ProblemConfig& config,
                                                const std::vector<double>& winsor_levels);

/// Empirical decomposition of 36 Var(sqrt(n)(delta_cf - Delta)).
///
/// Input rows are sqrt(n)(delta_k - Delta) for the six permutations in all_perms() order.
/// Second moments are taken about zero (the true Delta), averaged over replicates.
/// var_sum = sum of the 6 diagonal entries, within_pair = sum of the 6 ordered pairs
/// sharing an evaluation split, between_pair = sum of the 24 ordered pairs with different
/// evaluation splits; total = sum of all 36 entries = 36 * mean((mean_k e_k)^2).
struct CovDecomposition {
  double var_sum = 0.0;
  double within_pair = 0.0;
  double between_pair = 0.0;
  double between_cyclic = 0.0;      // pairs related by a cyclic shift of (a,b,c)
  double between_transposed = 0.0;  // remaining different-evaluation-split pairs
  double total = 0.0;
  // Monte Carlo standard errors of the replicate averages
  double var_sum_se = 0.0;
  double within_pair_se = 0.0;
  double between_pair_se = 0.0;
  double total_se = 0.0;
  int replicates = 0;
  Eigen::Matrix<double, 6, 6> second_moment = Eigen::Matrix<double, 6, 6>::Zero();
};

CovDecomposition decompose_covariance(const std::vector<std::array<double, 6>>& scaled_errors);

}  // namespace hdaipw
