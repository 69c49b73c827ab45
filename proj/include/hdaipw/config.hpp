#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace hdaipw {

/// Raised when a configuration violates a feasibility requirement (CLI exit code 2).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CovariateFamily { gaussian, uniform, hwe_discrete };

std::string to_string(CovariateFamily f);
CovariateFamily covariate_family_from_string(const std::string& s);

/// Propensity-score estimator: logistic MLE or ridge-logistic with penalty (lambda/2)||b||^2.
struct PsMethod {
  enum class Kind { mle, ridge };
  Kind kind = Kind::mle;
  double lambda = 0.0;

  static PsMethod mle() { return {}; }
  static PsMethod ridge(double lambda) { return {Kind::ridge, lambda}; }
  bool is_mle() const { return kind == Kind::mle; }
  double penalty() const { return is_mle() ? 0.0 : lambda; }
  std::string to_string() const;
  static PsMethod parse(const std::string& s);
};

struct ProblemConfig {
  int n = 10000;
  int p = 700;
  std::array<int, 3> split_sizes{3333, 3333, 3334};
  double gamma = 0.1;
  double sigma0_beta = 0.0;
  double sigma1_beta = 0.0;
  double rho01 = 0.0;
  double alpha0 = 0.0;
  double alpha1 = 2.0;
  double sigma_eps0 = 1.0;
  double sigma_eps1 = 1.0;
  CovariateFamily covariate_family = CovariateFamily::gaussian;
  double winsor_eps = 0.0;
  PsMethod ps_method{};
  std::uint64_t seed = 20240101;

  double kappa() const { return static_cast<double>(p) / n; }
  double r(int i) const { return static_cast<double>(split_sizes[i]) / n; }
  double kappa_i(int i) const { return static_cast<double>(p) / split_sizes[i]; }
  double ate() const { return alpha1 - alpha0; }
  /// First row index of split i (splits are contiguous row blocks).
  int split_begin(int i) const;

  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
};

/// Split n into three near-equal parts, remainder to the last split.
std::array<int, 3> equal_splits(int n);

/// Reference configuration: n = 10000/scale, p = 700/scale, gamma 0.1,
/// OR signal scales 0.1/sqrt(kappa), rho 0.2, intercepts (0, 2), unit noise.
ProblemConfig reference_config(double scale = 1.0);

void to_json(nlohmann::json& j, const ProblemConfig& c);
void from_json(const nlohmann::json& j, ProblemConfig& c);

/// Reads a JSON object; fields not present keep their value in `base`.
ProblemConfig config_from_json(const nlohmann::json& j, const ProblemConfig& base);

}  // namespace hdaipw
