#include "hdaipw/variance_oracle.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hdaipw/nuisance.hpp"

namespace hdaipw {

namespace {

std::string idx1(const char* base, int a) { return std::string(base) + "[" + std::to_string(a) + "]"; }
std::string idx2(const char* base, int a, int c) {
  return std::string(base) + "[" + std::to_string(a) + "][" + std::to_string(c) + "]";
}

void check_feasible(const ProblemConfig& config) {
  if (!(config.gamma > 0.0)) {
    throw InfeasibleError("variance formula: gamma must be positive (terms divide by gamma)");
  }
  for (int b = 0; b < 3; ++b) {
    if (config.r(b) <= 2.0 * config.kappa()) {
      std::ostringstream os;
      os << "variance formula: split " << b << " has kappa_b = " << config.kappa_i(b)
         << " >= 1/2, so its outcome regressions are not unique";
      throw InfeasibleError(os.str());
    }
  }
}

double noise_sq(const ProblemConfig& c) { return c.sigma_eps0 * c.sigma_eps0 + c.sigma_eps1 * c.sigma_eps1; }

double or_contrast(const ProblemConfig& c) {
  return c.sigma0_beta * c.sigma0_beta + c.sigma1_beta * c.sigma1_beta - 2.0 * c.rho01 * c.sigma0_beta * c.sigma1_beta;
}

}  // namespace

std::vector<NamedExpectation> variance_expectations(const ProblemConfig& config, const std::array<SeParams, 3>& se,
                                                 const JointLaw& law) {
  const double gamma = config.gamma;
  std::vector<NamedExpectation> out;
  const Eigen::MatrixXd unit = Eigen::MatrixXd::Identity(1, 1);

  out.push_back({"e_gamma_0", unit, [gamma](const double* z) { return z[0] * sigmoid(gamma * z[0]); }});
  out.push_back({"inv_sigma", unit, [gamma](const double* z) { return 1.0 / sigmoid(gamma * z[0]); }});
  for (int j = 0; j < 3; ++j) {
    const double shift = -se[j].alpha_star * gamma;
    out.push_back({idx1("e_shift", j), unit, [gamma, shift](const double* z) {
                     const double x = z[0] + shift;
                     return x * sigmoid(gamma * x);
                   }});
    out.push_back({idx1("q_shift", j), unit,
                   [gamma, shift](const double* z) { return sigmoid(gamma * (z[0] + shift)); }});
  }

  for (int a = 0; a < 3; ++a) {
    const Eigen::MatrixXd cov = law.marginal({0, a + 1});
    const double al = se[a].alpha_star;
    out.push_back({idx1("s", a), cov, [](const double* z) { return sigmoid(z[0]) / sigmoid(z[1]); }});
    out.push_back({idx1("h", a), cov, [](const double* z) { return z[0] * sigmoid(z[0]) / sigmoid(z[1]); }});
    out.push_back({idx1("inv2", a), cov, [](const double* z) {
                     const double sa = sigmoid(z[1]);
                     return sigmoid(z[0]) / (sa * sa);
                   }});
    out.push_back({idx1("m", a), cov, [al](const double* z) {
                     const double s0 = sigmoid(z[0]), sa = sigmoid(z[1]);
                     return (1.0 - al) * s0 / sa - s0 * s0 / sa + 0.5 * al;
                   }});
    out.push_back({idx1("k", a), cov, [](const double* z) { return sigmoid(z[0]) * z[1] / sigmoid(z[1]); }});
    out.push_back({idx1("d", a), cov, [](const double* z) {
                     const double s0 = sigmoid(z[0]);
                     return s0 * (1.0 - s0) / sigmoid(z[1]);
                   }});
  }

  for (int b = 0; b < 3; ++b) {
    for (int c = b + 1; c < 3; ++c) {
      out.push_back({idx2("within", b, c), law.marginal({0, b + 1, c + 1}),
                     [](const double* z) { return sigmoid(z[0]) / (sigmoid(z[1]) * sigmoid(z[2])); }});
    }
  }
  for (int a = 0; a < 3; ++a) {
    for (int c = 0; c < 3; ++c) {
      if (a == c) continue;
      const Eigen::MatrixXd cov = law.marginal({0, a + 1, c + 1});
      out.push_back({idx2("cross", a, c), cov, [](const double* z) { return sigmoid(z[0]) * z[2] / sigmoid(z[1]); }});
      const double lc = se[c].lambda_star;
      out.push_back({idx2("g", a, c), cov, [lc](const double* z) {
                       const double s0 = sigmoid(z[0]);
                       const double up = sigmoid(prox_rho(lc, z[2] + lc));
                       const double dn = sigmoid(prox_rho(lc, z[2]));
                       return s0 * (1.0 / sigmoid(z[1]) - 1.0) * (1.0 - up) + (1.0 - s0) * dn;
                     }});
    }
  }
  return out;
}

ScalarConstants scalar_constants(const ProblemConfig& config, const std::array<SeParams, 3>& se, const JointLaw& law,
                                 const QuadOptions& opts) {
  check_feasible(config);
  std::map<std::string, double> v;
  ScalarConstants c;
  for (const NamedExpectation& e : variance_expectations(config, se, law)) {
    const Expectation r = gaussian_expectation(e.cov, e.phi, opts);
    v[e.name] = r.value;
    c.max_quadrature_error = std::max(c.max_quadrature_error, r.std_error);
  }
  c.e_gamma_0 = v.at("e_gamma_0");
  c.inv_sigma = v.at("inv_sigma");
  for (int a = 0; a < 3; ++a) {
    c.e_shift[a] = v.at(idx1("e_shift", a));
    c.q_shift[a] = v.at(idx1("q_shift", a));
    c.s[a] = v.at(idx1("s", a));
    c.h[a] = v.at(idx1("h", a));
    c.inv2[a] = v.at(idx1("inv2", a));
    c.m[a] = v.at(idx1("m", a));
    c.k[a] = v.at(idx1("k", a));
    c.d[a] = v.at(idx1("d", a));
    c.t[a] = (0.5 * config.r(a) - config.kappa()) * (1.0 - 4.0 * c.e_gamma_0 * c.e_gamma_0);
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      c.within[a][b] = v.at(idx2("within", std::min(a, b), std::max(a, b)));
      c.cross[a][b] = v.at(idx2("cross", a, b));
      c.g[a][b] = v.at(idx2("g", a, b));
    }
  }

  const double gamma = config.gamma, kappa = config.kappa(), e0 = c.e_gamma_0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double var_j = se[j].alpha_star * se[j].alpha_star * gamma * gamma +
                           se[j].kappa_i * se[j].sigma_star * se[j].sigma_star;
      const double ex = std::exp(0.5 * var_j);
      c.f[i][j] = 2.0 * config.r(i) * c.h[j] * e0 / gamma - 4.0 * kappa * e0 * (e0 + ex * c.e_shift[j]) +
                  2.0 * kappa * (0.5 + ex * c.q_shift[j]);
    }
  }
  return c;
}

double v_var(const ProblemConfig& config, const std::array<SeParams, 3>& se, const ScalarConstants& c) {
  check_feasible(config);
  const double kappa = config.kappa(), gamma = config.gamma, g2 = gamma * gamma, e0 = c.e_gamma_0;
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (b == a) continue;
      const int cc = 3 - a - b;
      const double rb = config.r(b), rc = config.r(cc);
      const double rb2 = rb - 2.0 * kappa;
      const double sa = c.s[a], ha = c.h[a], tb = c.t[b];
      const double ka = se[a].kappa_i, sg = se[a].sigma_star;
      sum += 2.0 * kappa * (1.0 - 2.0 * sa) / (rc * rb2) + rb / (rc * rb2) * c.inv2[a] +
             4.0 * rc * e0 * e0 * ha * ha / (g2 * rb * tb) - 4.0 * e0 * ha / (gamma * tb) * (sa - 1.0) +
             2.0 * g2 / rb2 * c.m[a] * c.m[a] + 2.0 * ka * sg * sg / rb2 * (sa - 0.5) * (sa - 0.5) +
             (sa - 1.0) * (sa - 1.0) / tb;
    }
  }
  return sum;
}

double v_within(const ProblemConfig& config, const ScalarConstants& c) {
  check_feasible(config);
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (b == a) continue;
      const int cc = 3 - a - b;
      sum += c.within[b][cc] / config.r(a);
    }
  }
  return sum;
}

double v_between(const ProblemConfig& config, const std::array<SeParams, 3>& se, const ScalarConstants& c) {
  check_feasible(config);
  const double kappa = config.kappa(), gamma = config.gamma, g2 = gamma * gamma, e0 = c.e_gamma_0;
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (b == a) continue;
      const int cc = 3 - a - b;
      const double ra = config.r(a), rb = config.r(b), rc = config.r(cc);
      const double rb2 = rb - 2.0 * kappa;
      const double sa = c.s[a], sc = c.s[cc], ha = c.h[a], hc = c.h[cc], tb = c.t[b];
      const double lc = se[cc].lambda_star, gac = c.g[a][cc];
      sum += 4.0 * (sa - 0.5) / rb * c.k[a]
           - 4.0 / rb * (c.d[a] + c.d[cc]) * ha
           + (sc - 4.0 * sa - 1.0) * (sa - 1.0) / tb
           + 4.0 * e0 * ha * (2.0 * sa - sc + 1.0) / (gamma * tb)
           - 2.0 * (c.f[b][a] + c.f[b][cc]) * (2.0 * e0 * ha / gamma - sa + 1.0) / (rb * tb)
           + 4.0 * (sc - 0.5) / rb * (c.cross[a][cc] + lc * gac)
           + 4.0 * std::sqrt(ra * rc) * ha * hc * e0 * e0 / (rb * g2 * tb)
           - 4.0 * lc / rb2 * (sc - 0.5) * gac
           + 2.0 * g2 / rb2 * (c.d[a] - se[a].alpha_star * (sa - 0.5)) * (c.d[cc] - se[cc].alpha_star * (sc - 0.5));
    }
  }
  return sum;
}

double v_t2(const ProblemConfig& config) {
  double inv_r = 0.0;
  for (int i = 0; i < 3; ++i) inv_r += 1.0 / config.r(i);
  return config.kappa() / 9.0 * or_contrast(config) * inv_r;
}

double classical_variance(const ProblemConfig& config, int order) {
  const double gamma = config.gamma;
  const double inv = gh_expectation_1d(0.0, [gamma](double z) { return 1.0 / sigmoid(gamma * z); }, order);
  return noise_sq(config) * inv + config.kappa() * or_contrast(config);
}

double between_pair_theory(const ProblemConfig& config, const std::array<SeParams, 3>& se, const ScalarConstants& c) {
  return noise_sq(config) * v_between(config, se, c);
}

double VarianceReport::sigma_cf() const { return std::sqrt(sigma_cf_sq); }
double VarianceReport::sigma_classical() const { return std::sqrt(sigma_classical_sq); }

nlohmann::json VarianceReport::to_json(bool with_constants) const {
  nlohmann::json j{{"v_var", v_var},
                   {"v_within", v_within},
                   {"v_between", v_between},
                   {"v_t1", v_t1},
                   {"v_t2", v_t2},
                   {"sigma_cf_sq", sigma_cf_sq},
                   {"sigma_cf", sigma_cf()},
                   {"sigma_classical_sq", sigma_classical_sq},
                   {"sigma_classical", sigma_classical()},
                   {"f_value", f_value},
                   {"inv_sigma", constants.inv_sigma},
                   {"between_pair_theory", between_pair_theory},
                   {"max_quadrature_error", constants.max_quadrature_error}};
  j["state_evolution"] = nlohmann::json::array();
  for (const auto& s : se) j["state_evolution"].push_back(s);
  if (with_constants) {
    const auto& c = constants;
    j["constants"] = {{"e_gamma_0", c.e_gamma_0}, {"e_shift", c.e_shift}, {"q_shift", c.q_shift}, {"s", c.s},
                      {"h", c.h}, {"t", c.t}, {"inv2", c.inv2}, {"m", c.m}, {"k", c.k}, {"d", c.d},
                      {"within", c.within}, {"cross", c.cross}, {"g", c.g}, {"f", c.f}};
  }
  return j;
}

std::vector<std::string> VarianceReport::csv_header() {
  return {"v_var",     "v_within", "v_between", "v_t1",    "v_t2",    "sigma_cf_sq", "sigma_cf",
          "sigma_classical_sq", "sigma_classical", "f_value", "inv_sigma", "between_pair_theory",
          "alpha_1",   "alpha_2",  "alpha_3",   "sigma_1", "sigma_2", "sigma_3",     "lambda_1",
          "lambda_2",  "lambda_3"};
}

std::vector<double> VarianceReport::csv_row() const {
  std::vector<double> row{v_var,           v_within,           v_between, v_t1,      v_t2,
                          sigma_cf_sq,     sigma_cf(),         sigma_classical_sq,  sigma_classical(),
                          f_value,         constants.inv_sigma, between_pair_theory};
  for (const auto& s : se) row.push_back(s.alpha_star);
  for (const auto& s : se) row.push_back(s.sigma_star);
  for (const auto& s : se) row.push_back(s.lambda_star);
  return row;
}

std::array<SeParams, 3> split_se_params(const ProblemConfig& config, SeCache* cache) {
  std::array<SeParams, 3> se;
  for (int i = 0; i < 3; ++i) {
    const double lam = config.ps_method.penalty() / config.r(i);
    try {
      se[i] = cache ? cache->get(config.kappa_i(i), config.gamma, lam) : solve_se(config.kappa_i(i), config.gamma, lam);
    } catch (const std::runtime_error& e) {
      throw InfeasibleError(e.what());
    }
  }
  return se;
}

VarianceReport sigma_cf(const ProblemConfig& config, SeCache* cache, const QuadOptions& opts) {
  config.validate();
  check_feasible(config);
  VarianceReport rep;
  rep.se = split_se_params(config, cache);
  const JointLaw law = joint_covariance(rep.se, config.gamma);
  rep.constants = scalar_constants(config, rep.se, law, opts);
  rep.v_var = v_var(config, rep.se, rep.constants);
  rep.v_within = v_within(config, rep.constants);
  rep.v_between = v_between(config, rep.se, rep.constants);
  const double noise = noise_sq(config);
  rep.v_t1 = noise / 36.0 * (rep.v_var + rep.v_within + rep.v_between);
  rep.v_t2 = v_t2(config);
  rep.sigma_cf_sq = rep.v_t1 + rep.v_t2;
  rep.f_value = rep.v_t1 / noise;
  rep.sigma_classical_sq = noise * rep.constants.inv_sigma + config.kappa() * or_contrast(config);
  rep.between_pair_theory = noise * rep.v_between;
  return rep;
}

ProblemConfig config_at_kappa(const ProblemConfig& config_template, double kappa, double gamma) {
  if (!(kappa > 0.0) || !(kappa < 1.0)) throw std::invalid_argument("config_at_kappa: kappa must lie in (0, 1)");
  ProblemConfig c = config_template;
  c.n = 300000;
  c.p = static_cast<int>(std::lround(kappa * c.n));
  const double fr0 = config_template.r(0), fr1 = config_template.r(1);
  c.split_sizes[0] = static_cast<int>(std::lround(fr0 * c.n));
  c.split_sizes[1] = static_cast<int>(std::lround(fr1 * c.n));
  c.split_sizes[2] = c.n - c.split_sizes[0] - c.split_sizes[1];
  // the OR signal scales keep kappa * sigma_beta^2 fixed, so the linear predictors keep their variance
  const double scale = std::sqrt(config_template.kappa() / c.kappa());
  c.sigma0_beta *= scale;
  c.sigma1_beta *= scale;
  c.gamma = gamma;
  return c;
}

std::vector<RatioPoint> f_ratio_curve(double gamma, const std::vector<double>& kappa_grid,
                                      const ProblemConfig& config_template, SeCache* cache, const QuadOptions& opts) {
  std::vector<RatioPoint> out;
  for (double kappa : kappa_grid) {
    RatioPoint pt;
    pt.kappa = kappa;
    pt.gamma = gamma;
    try {
      const ProblemConfig c = config_at_kappa(config_template, kappa, gamma);
      const VarianceReport rep = sigma_cf(c, cache, opts);
      pt.feasible = true;
      pt.f_value = rep.f_value;
      pt.inv_sigma = rep.constants.inv_sigma;
      pt.log_f_ratio = std::log(rep.f_value / rep.constants.inv_sigma);
      pt.log_total_ratio = std::log(rep.sigma_cf_sq / rep.sigma_classical_sq);
      pt.between_pair_theory = rep.between_pair_theory;
    } catch (const InfeasibleError& e) {
      pt.feasible = false;
      pt.reason = e.what();
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace hdaipw
