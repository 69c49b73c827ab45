#include "hdaipw/config.hpp"

#include <cmath>
#include <sstream>

namespace hdaipw {

std::string to_string(CovariateFamily f) {
  switch (f) {
    case CovariateFamily::gaussian: return "gaussian";
    case CovariateFamily::uniform: return "uniform";
    case CovariateFamily::hwe_discrete: return "hwe_discrete";
  }
  return "gaussian";
}

CovariateFamily covariate_family_from_string(const std::string& s) {
  if (s == "gaussian") return CovariateFamily::gaussian;
  if (s == "uniform") return CovariateFamily::uniform;
  if (s == "hwe_discrete") return CovariateFamily::hwe_discrete;
  throw std::invalid_argument("unknown covariate_family '" + s + "'");
}

std::string PsMethod::to_string() const {
  if (is_mle()) return "mle";
  std::ostringstream os;
  os.precision(17);
  os << "ridge(" << lambda << ")";
  return os.str();
}

// Accepts "mle", "ridge(0.5)" or "ridge:0.5".
PsMethod PsMethod::parse(const std::string& s) {
  if (s == "mle") return mle();
  if (s.rfind("ridge", 0) == 0) {
    std::string rest = s.substr(5);
    if (!rest.empty() && (rest.front() == '(' || rest.front() == ':')) rest.erase(0, 1);
    if (!rest.empty() && rest.back() == ')') rest.pop_back();
    std::size_t used = 0;
    double lam = std::stod(rest, &used);
    if (used != rest.size() || !(lam >= 0.0)) {
      throw std::invalid_argument("bad ridge penalty in ps_method '" + s + "'");
    }
    return ridge(lam);
  }
  throw std::invalid_argument("unknown ps_method '" + s + "'");
}

int ProblemConfig::split_begin(int i) const {
  int b = 0;
  for (int k = 0; k < i; ++k) b += split_sizes[k];
  return b;
}

void ProblemConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("ProblemConfig: " + m); };
  if (p < 1) fail("p must be >= 1");
  if (split_sizes[0] + split_sizes[1] + split_sizes[2] != n) fail("split_sizes must sum to n");
  for (int s : split_sizes) {
    if (s < p + 2) fail("each split must have at least p+2 rows");
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma must be finite and >= 0");
  if (!(sigma0_beta >= 0.0) || !(sigma1_beta >= 0.0)) fail("signal scales must be >= 0");
  if (!(std::abs(rho01) <= 1.0)) fail("|rho01| must be <= 1");
  if (!(sigma_eps0 > 0.0) || !(sigma_eps1 > 0.0)) fail("noise SDs must be > 0");
  if (!(winsor_eps >= 0.0 && winsor_eps < 0.5)) fail("winsor_eps must lie in [0, 0.5)");
  if (!ps_method.is_mle() && !(ps_method.lambda >= 0.0)) fail("ridge penalty must be >= 0");
}

std::array<int, 3> equal_splits(int n) {
  int a = n / 3;
  return {a, a, n - 2 * a};
}

ProblemConfig reference_config(double scale) {
  if (!(scale >= 1.0)) throw std::invalid_argument("scale must be >= 1");
  ProblemConfig c;
  c.n = static_cast<int>(std::lround(10000.0 / scale));
  c.p = static_cast<int>(std::lround(700.0 / scale));
  c.split_sizes = equal_splits(c.n);
  c.gamma = 0.1;
  c.sigma0_beta = 0.1 / std::sqrt(c.kappa());
  c.sigma1_beta = c.sigma0_beta;
  c.rho01 = 0.2;
  c.alpha0 = 0.0;
  c.alpha1 = 2.0;
  c.sigma_eps0 = 1.0;
  c.sigma_eps1 = 1.0;
  c.winsor_eps = 0.005;
  return c;
}

void to_json(nlohmann::json& j, const ProblemConfig& c) {
  j = nlohmann::json{{"n", c.n},
                     {"p", c.p},
                     {"split_sizes", c.split_sizes},
                     {"gamma", c.gamma},
                     {"sigma0_beta", c.sigma0_beta},
                     {"sigma1_beta", c.sigma1_beta},
                     {"rho01", c.rho01},
                     {"alpha0", c.alpha0},
                     {"alpha1", c.alpha1},
                     {"sigma_eps0", c.sigma_eps0},
                     {"sigma_eps1", c.sigma_eps1},
                     {"covariate_family", to_string(c.covariate_family)},
                     {"winsor_eps", c.winsor_eps},
                     {"ps_method", c.ps_method.to_string()},
                     {"seed", c.seed}};
}

ProblemConfig config_from_json(const nlohmann::json& j, const ProblemConfig& base) {
  if (!j.is_object()) throw std::invalid_argument("config JSON must be an object");
  ProblemConfig c = base;
  for (const auto& [key, val] : j.items()) {
    if (key == "n") c.n = val.get<int>();
    else if (key == "p") c.p = val.get<int>();
    else if (key == "split_sizes") c.split_sizes = val.get<std::array<int, 3>>();
    else if (key == "gamma") c.gamma = val.get<double>();
    else if (key == "sigma0_beta") c.sigma0_beta = val.get<double>();
    else if (key == "sigma1_beta") c.sigma1_beta = val.get<double>();
    else if (key == "rho01") c.rho01 = val.get<double>();
    else if (key == "alpha0") c.alpha0 = val.get<double>();
    else if (key == "alpha1") c.alpha1 = val.get<double>();
    else if (key == "sigma_eps0") c.sigma_eps0 = val.get<double>();
    else if (key == "sigma_eps1") c.sigma_eps1 = val.get<double>();
    else if (key == "covariate_family") c.covariate_family = covariate_family_from_string(val.get<std::string>());
    else if (key == "winsor_eps") c.winsor_eps = val.get<double>();
    else if (key == "ps_method") c.ps_method = PsMethod::parse(val.get<std::string>());
    else if (key == "seed") c.seed = val.get<std::uint64_t>();
    else throw std::invalid_argument("unknown config field '" + key + "'");
  }
  // n given without split_sizes: default to equal thirds.
  if (j.contains("n") && !j.contains("split_sizes")) c.split_sizes = equal_splits(c.n);
  return c;
}

void from_json(const nlohmann::json& j, ProblemConfig& c) { c = config_from_json(j, ProblemConfig{}); }

}  // namespace hdaipw
