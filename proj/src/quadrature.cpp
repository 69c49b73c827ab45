#include "hdaipw/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/sobol.hpp>

#include "hdaipw/rng.hpp"

namespace hdaipw {

const GaussHermiteRule& gauss_hermite_rule(int order) {
  if (order < 1 || order > 1000) throw std::invalid_argument("gauss_hermite_rule: order out of range");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<GaussHermiteRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it != cache.end()) return *it->second;

  // Jacobi matrix of the probabilists' Hermite polynomials: off-diagonal sqrt(k)
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  auto rule = std::make_unique<GaussHermiteRule>();
  rule->nodes.resize(order);
  rule->weights.resize(order);
  double total = 0.0;
  for (int i = 0; i < order; ++i) {
    rule->nodes[i] = es.eigenvalues()[i];
    rule->weights[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    total += rule->weights[i];
  }
  for (double& w : rule->weights) w /= total;
  // symmetrize to remove eigen-solver asymmetry in the nodes
  for (int i = 0; i < order / 2; ++i) {
    const int j = order - 1 - i;
    const double x = 0.5 * (rule->nodes[j] - rule->nodes[i]);
    const double w = 0.5 * (rule->weights[i] + rule->weights[j]);
    rule->nodes[i] = -x;
    rule->nodes[j] = x;
    rule->weights[i] = rule->weights[j] = w;
  }
  if (order % 2 == 1) rule->nodes[order / 2] = 0.0;
  auto& ref = *rule;
  cache.emplace(order, std::move(rule));
  return ref;
}

namespace {

// Factor cov = L L' with L of size dim x rank (rank = number of non-negligible eigenvalues).
Eigen::MatrixXd whitening_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0) throw std::invalid_argument("gaussian_expectation: bad covariance");
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double top = std::max(ev.maxCoeff(), 0.0);
  if (ev.minCoeff() < -1e-10 * std::max(top, 1.0)) {
    throw std::invalid_argument("gaussian_expectation: covariance is not positive semidefinite");
  }
  std::vector<int> keep;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] > 1e-14 * top && ev[i] > 0.0) keep.push_back(i);
  }
  Eigen::MatrixXd L(cov.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    L.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]) * std::sqrt(ev[keep[k]]);
  }
  return L;
}

[[noreturn]] void report_non_finite(const double* z, int dim, double value) {
  std::ostringstream os;
  os.precision(17);
  os << "gaussian_expectation: integrand returned " << value << " at node (";
  for (int d = 0; d < dim; ++d) os << (d ? ", " : "") << z[d];
  os << ")";
  throw std::runtime_error(os.str());
}

}  // namespace

double gh_expectation(const Eigen::MatrixXd& cov, const Integrand& phi, int order) {
  const Eigen::MatrixXd L = whitening_factor(cov);
  const int dim = static_cast<int>(L.rows()), rank = static_cast<int>(L.cols());
  std::vector<double> z(dim, 0.0);
  if (rank == 0) {
    const double v = phi(z.data());
    if (!std::isfinite(v)) report_non_finite(z.data(), dim, v);
    return v;
  }
  const GaussHermiteRule& rule = gauss_hermite_rule(order);
  std::vector<int> idx(rank, 0);
  double sum = 0.0;
  while (true) {
    double w = 1.0;
    for (int d = 0; d < dim; ++d) z[d] = 0.0;
    for (int k = 0; k < rank; ++k) {
      const double x = rule.nodes[idx[k]];
      w *= rule.weights[idx[k]];
      for (int d = 0; d < dim; ++d) z[d] += L(d, k) * x;
    }
    const double v = phi(z.data());
    if (!std::isfinite(v)) report_non_finite(z.data(), dim, v);
    sum += w * v;
    int k = 0;
    while (k < rank && ++idx[k] == order) idx[k++] = 0;
    if (k == rank) break;
  }
  return sum;
}

Expectation qmc_expectation(const Eigen::MatrixXd& cov, const Integrand& phi, long points, int randomizations,
                            std::uint64_t seed) {
  if (points < 1 || randomizations < 2) throw std::invalid_argument("qmc_expectation: need points>0, randomizations>1");
  const Eigen::MatrixXd L = whitening_factor(cov);
  const int dim = static_cast<int>(L.rows()), rank = static_cast<int>(L.cols());
  Expectation out;
  out.points = points * randomizations;
  std::vector<double> z(dim, 0.0);
  if (rank == 0) {
    out.value = phi(z.data());
    return out;
  }
  const boost::math::normal_distribution<double> normal;
  const double scale = std::ldexp(1.0, -64);
  const double lo = std::ldexp(1.0, -60), hi = 1.0 - std::ldexp(1.0, -53);
  std::vector<double> means(randomizations);
  std::vector<double> shift(rank), w(rank);
  for (int r = 0; r < randomizations; ++r) {
    Rng rng = make_rng(seed, "qmc-shift", static_cast<std::uint64_t>(r));
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int k = 0; k < rank; ++k) shift[k] = ud(rng);
    boost::random::sobol qrng(static_cast<std::size_t>(rank));
    double sum = 0.0;
    for (long i = 0; i < points; ++i) {
      for (int k = 0; k < rank; ++k) {
        double u = static_cast<double>(qrng()) * scale + shift[k];
        u -= std::floor(u);
        u = std::min(std::max(u, lo), hi);
        w[k] = boost::math::quantile(normal, u);
      }
      for (int d = 0; d < dim; ++d) {
        double acc = 0.0;
        for (int k = 0; k < rank; ++k) acc += L(d, k) * w[k];
        z[d] = acc;
      }
      const double v = phi(z.data());
      if (!std::isfinite(v)) report_non_finite(z.data(), dim, v);
      sum += v;
    }
    means[r] = sum / static_cast<double>(points);
  }
  double m = 0.0;
  for (double v : means) m += v;
  m /= randomizations;
  double ss = 0.0;
  for (double v : means) ss += (v - m) * (v - m);
  out.value = m;
  out.std_error = std::sqrt(ss / (randomizations - 1.0) / randomizations);
  return out;
}

Expectation gaussian_expectation(const Eigen::MatrixXd& cov, const Integrand& phi, const QuadOptions& opts) {
  if (opts.method == QuadMethod::qmc) {
    return qmc_expectation(cov, phi, opts.qmc_points, opts.qmc_randomizations, opts.qmc_seed);
  }
  Expectation out;
  const bool high_dim = whitening_factor(cov).cols() >= 3;
  int order = high_dim ? opts.order_3d : opts.order;
  const int max_order = high_dim ? opts.max_order_3d : opts.max_order;
  double prev = gh_expectation(cov, phi, order);
  out.value = prev;
  out.order = order;
  if (!opts.adaptive) return out;
  while (2 * order <= max_order) {
    order *= 2;
    const double next = gh_expectation(cov, phi, order);
    out.value = next;
    out.order = order;
    out.std_error = std::abs(next - prev);
    if (std::abs(next - prev) <= opts.rel_tol * std::abs(next) + 1e-13) return out;
    prev = next;
  }
  return out;
}

double gh_expectation_1d(double mean, const std::function<double(double)>& phi, int order) {
  const GaussHermiteRule& rule = gauss_hermite_rule(order);
  double sum = 0.0;
  for (int i = 0; i < order; ++i) sum += rule.weights[i] * phi(mean + rule.nodes[i]);
  return sum;
}

}  // namespace hdaipw
