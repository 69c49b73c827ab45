#include "hdaipw/state_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hdaipw/nuisance.hpp"
#include "hdaipw/quadrature.hpp"

namespace hdaipw {

double prox_rho(double lambda, double z) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda) || !std::isfinite(z)) {
    throw std::invalid_argument("prox_rho: need finite lambda >= 0 and finite z");
  }
  if (lambda == 0.0) return z;
  double lo = z - lambda, hi = z;
  double t = z - lambda * sigmoid(z);
  double prev_f = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 50; ++it) {
    const double s = sigmoid(t);
    const double f = lambda * s + t - z;
    if (std::abs(f) <= 1e-14) return t;
    if (f > 0.0) {
      hi = std::min(hi, t);
    } else {
      lo = std::max(lo, t);
    }
    double next = t - f / (1.0 + lambda * s * (1.0 - s));
    if (!(next > lo && next < hi) || std::abs(f) > 0.5 * prev_f) next = 0.5 * (lo + hi);
    prev_f = std::abs(f);
    if (next == t) return t;
    t = next;
  }
  return t;
}

double prox_rho_derivative(double lambda, double z) {
  const double s = sigmoid(prox_rho(lambda, z));
  return 1.0 / (1.0 + lambda * s * (1.0 - s));
}

void to_json(nlohmann::json& j, const SeParams& s) {
  j = nlohmann::json{{"alpha_star", s.alpha_star},   {"sigma_star", s.sigma_star}, {"lambda_star", s.lambda_star},
                     {"kappa_i", s.kappa_i},         {"gamma", s.gamma},           {"ridge_lambda", s.ridge_lambda},
                     {"is_tilde", s.is_tilde},       {"residual", s.residual},     {"iterations", s.iterations}};
}

void from_json(const nlohmann::json& j, SeParams& s) {
  s.alpha_star = j.at("alpha_star").get<double>();
  s.sigma_star = j.at("sigma_star").get<double>();
  s.lambda_star = j.at("lambda_star").get<double>();
  s.kappa_i = j.at("kappa_i").get<double>();
  s.gamma = j.at("gamma").get<double>();
  s.ridge_lambda = j.at("ridge_lambda").get<double>();
  s.is_tilde = j.at("is_tilde").get<bool>();
  s.residual = j.value("residual", 0.0);
  s.iterations = j.value("iterations", 0);
}

namespace {

struct SeMoments {
  double r2 = 0.0;       // E[r^2]
  double z1r = 0.0;      // E[Z1 r], so E[Q1 r] = gamma E[Z1 r]
  double inv = 0.0;      // E[1 / (1 + q sigmoid'(t))]
  double a_bar = 0.0;    // E[sigmoid'(t) / (1 + q sigmoid'(t))]
};

SeMoments se_moments(double kappa, double gamma, double alpha, double sigma, double q, int order) {
  const GaussHermiteRule& rule = gauss_hermite_rule(order);
  const double sk = std::sqrt(kappa) * sigma;
  SeMoments m;
  for (int i = 0; i < order; ++i) {
    const double z1 = rule.nodes[i];
    const double q1 = gamma * z1;
    const double p1 = sigmoid(q1);
    for (int j = 0; j < order; ++j) {
      const double w = rule.weights[i] * rule.weights[j];
      const double q2 = alpha * q1 + sk * rule.nodes[j];
      for (int a = 0; a < 2; ++a) {
        const double wa = w * (a ? p1 : 1.0 - p1);
        const double s = sigmoid(prox_rho(q, q2 + q * a));
        const double d = s * (1.0 - s);
        const double r = a - s;
        m.r2 += wa * r * r;
        m.z1r += wa * z1 * r;
        m.inv += wa / (1.0 + q * d);
        m.a_bar += wa * d / (1.0 + q * d);
      }
    }
  }
  return m;
}

std::array<double, 3> residual_from(const SeMoments& m, double kappa, double gamma, double lam, double alpha,
                                    double sigma, double q) {
  return {1.0 - q * q * m.r2 / (kappa * kappa * sigma * sigma), gamma > 0.0 ? m.z1r / gamma - lam * alpha : 0.0,
          1.0 - kappa + lam * q - m.inv};
}

double max_abs(const std::array<double, 3>& r) {
  return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
}

struct Point {
  double alpha, sigma, q;
};

// Finite-difference Newton in (alpha, log sigma, log q); returns the final residual norm.
double newton_polish(Point& x, double kappa, double gamma, double lam, int order, double tol, int& iters) {
  auto eval = [&](const Point& p) {
    return residual_from(se_moments(kappa, gamma, p.alpha, p.sigma, p.q, order), kappa, gamma, lam, p.alpha, p.sigma,
                         p.q);
  };
  const bool fit_alpha = gamma > 0.0;
  std::array<double, 3> r = eval(x);
  double norm = max_abs(r);
  for (int it = 0; it < 40 && norm > tol; ++it) {
    ++iters;
    Eigen::Vector3d u(x.alpha, std::log(x.sigma), std::log(x.q));
    Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
    for (int k = 0; k < 3; ++k) {
      if (k == 0 && !fit_alpha) {
        J(0, 0) = 1.0;
        continue;
      }
      const double h = 1e-6 * std::max(1.0, std::abs(u[k]));
      Eigen::Vector3d up = u, dn = u;
      up[k] += h;
      dn[k] -= h;
      const auto rp = eval({up[0], std::exp(up[1]), std::exp(up[2])});
      const auto rm = eval({dn[0], std::exp(dn[1]), std::exp(dn[2])});
      for (int e = 0; e < 3; ++e) J(e, k) = (rp[e] - rm[e]) / (2.0 * h);
    }
    const Eigen::Vector3d rv(r[0], r[1], r[2]);
    Eigen::Vector3d step = J.colPivHouseholderQr().solve(-rv);
    if (!step.allFinite()) return norm;
    double scale = 1.0;
    bool improved = false;
    for (int half = 0; half < 30; ++half, scale *= 0.5) {
      const Eigen::Vector3d cand = u + scale * step;
      const Point p{fit_alpha ? cand[0] : 0.0, std::exp(cand[1]), std::exp(cand[2])};
      const auto rc = eval(p);
      if (max_abs(rc) < norm) {
        x = p;
        r = rc;
        norm = max_abs(rc);
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return norm;
}

SeParams solve_system(double kappa, double gamma, double lam, const SeSolverOptions& opts) {
  if (!(kappa > 0.0) || !(kappa < 1.0)) throw std::invalid_argument("solve_se: kappa_i must lie in (0, 1)");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("solve_se: gamma must be finite, >= 0");
  if (!(lam >= 0.0) || !std::isfinite(lam)) throw std::invalid_argument("solve_se: lambda must be finite, >= 0");

  const bool fit_alpha = gamma > 0.0;
  int iters = 0;
  double best = std::numeric_limits<double>::infinity();
  Point best_x{};

  auto attempt = [&](Point x) {
    double norm = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_fixed_point_iter; ++it) {
      ++iters;
      const SeMoments m = se_moments(kappa, gamma, x.alpha, x.sigma, x.q, opts.order);
      norm = max_abs(residual_from(m, kappa, gamma, lam, x.alpha, x.sigma, x.q));
      if (!std::isfinite(norm)) break;
      if (norm < best) {
        best = norm;
        best_x = x;
      }
      if (norm <= 1e-4) break;
      const double denom = m.a_bar + lam;
      const Point next{fit_alpha ? (m.a_bar * x.alpha + m.z1r / gamma) / denom : 0.0, std::sqrt(m.r2) / denom,
                       kappa / denom};
      x.alpha += opts.damping * (next.alpha - x.alpha);
      x.sigma += opts.damping * (next.sigma - x.sigma);
      x.q += opts.damping * (next.q - x.q);
      if (!(x.sigma > 0.0) || !(x.q > 0.0) || !std::isfinite(x.alpha)) break;
    }
    if (!std::isfinite(best)) return;
    Point p = best_x;
    const double polished = newton_polish(p, kappa, gamma, lam, opts.order, opts.tol, iters);
    if (polished < best) {
      best = polished;
      best_x = p;
    }
  };

  attempt({fit_alpha ? 1.0 : 0.0, 1.0 + gamma, 1.0});
  if (!(best <= opts.tol)) {
    const double qd = 0.25;
    attempt({fit_alpha ? 1.0 : 0.0, 1.0 / std::sqrt(qd), kappa / (qd + lam)});
  }
  if (!(best <= opts.tol)) {
    std::ostringstream os;
    os << "solve_se: no solution at kappa_i=" << kappa << " gamma=" << gamma << " lambda=" << lam
       << " (last residual " << best << "); the pair may lie outside the existence region";
    throw std::runtime_error(os.str());
  }
  SeParams out;
  out.alpha_star = best_x.alpha;
  out.sigma_star = best_x.sigma;
  out.lambda_star = best_x.q;
  out.kappa_i = kappa;
  out.gamma = gamma;
  out.ridge_lambda = lam;
  out.is_tilde = lam > 0.0;
  out.residual = best;
  out.iterations = iters;
  return out;
}

}  // namespace

std::array<double, 3> se_residual(double kappa, double gamma, double ridge_lambda, double alpha, double sigma,
                                  double lambda_star, int order) {
  const SeMoments m = se_moments(kappa, gamma, alpha, sigma, lambda_star, order);
  return residual_from(m, kappa, gamma, ridge_lambda, alpha, sigma, lambda_star);
}

SeParams solve_se_mle(double kappa_i, double gamma, const SeSolverOptions& opts) {
  return solve_system(kappa_i, gamma, 0.0, opts);
}

SeParams solve_se_ridge(double kappa_i, double gamma, double ridge_lambda_scaled, const SeSolverOptions& opts) {
  if (!(ridge_lambda_scaled > 0.0)) throw std::invalid_argument("solve_se_ridge: penalty must be positive");
  return solve_system(kappa_i, gamma, ridge_lambda_scaled, opts);
}

SeParams solve_se(double kappa_i, double gamma, double ridge_lambda, const SeSolverOptions& opts) {
  return ridge_lambda > 0.0 ? solve_se_ridge(kappa_i, gamma, ridge_lambda, opts) : solve_se_mle(kappa_i, gamma, opts);
}

Eigen::MatrixXd JointLaw::marginal(std::initializer_list<int> idx) const {
  const std::vector<int> v(idx);
  Eigen::MatrixXd out(v.size(), v.size());
  for (std::size_t a = 0; a < v.size(); ++a) {
    for (std::size_t b = 0; b < v.size(); ++b) out(a, b) = cov(v[a], v[b]);
  }
  return out;
}

JointLaw joint_covariance(const std::array<SeParams, 3>& params, double gamma) {
  const double g2 = gamma * gamma;
  JointLaw law;
  law.cov(0, 0) = g2;
  for (int i = 0; i < 3; ++i) {
    if (params[i].gamma != gamma) throw std::invalid_argument("joint_covariance: parameters solved for another gamma");
    const double ai = params[i].alpha_star;
    law.cov(0, i + 1) = law.cov(i + 1, 0) = ai * g2;
    for (int j = 0; j < 3; ++j) law.cov(i + 1, j + 1) = ai * params[j].alpha_star * g2;
    law.cov(i + 1, i + 1) += params[i].kappa_i * params[i].sigma_star * params[i].sigma_star;
  }
  law.cov = 0.5 * (law.cov + law.cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(law.cov);
  if (es.eigenvalues().minCoeff() < -1e-10) {
    throw std::runtime_error("joint_covariance: matrix is not positive semidefinite");
  }
  if (es.eigenvalues().minCoeff() < 0.0) {
    const Eigen::Vector4d clipped = es.eigenvalues().cwiseMax(0.0);
    law.cov = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  }
  return law;
}

SeCache::SeCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  const nlohmann::json j = nlohmann::json::parse(in);
  for (const auto& e : j.at("entries")) {
    SeParams s = e.get<SeParams>();
    entries_[{s.kappa_i, s.gamma, s.ridge_lambda}] = s;
  }
}

SeParams SeCache::get(double kappa_i, double gamma, double ridge_lambda, const SeSolverOptions& opts) {
  const Key key{kappa_i, gamma, ridge_lambda};
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
  }
  SeParams s = solve_se(kappa_i, gamma, ridge_lambda, opts);
  std::lock_guard<std::mutex> lock(mu_);
  entries_.emplace(key, s);
  return s;
}

void SeCache::save() const {
  if (path_.empty()) return;
  nlohmann::json j;
  j["entries"] = nlohmann::json::array();
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& [key, s] : entries_) j["entries"].push_back(s);
  std::ofstream out(path_);
  if (!out) throw std::runtime_error("SeCache::save: cannot write " + path_);
  out << j.dump(1) << '\n';
}

std::size_t SeCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

}  // namespace hdaipw
