#include "hdaipw/estimator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hdaipw {

const std::array<Perm, 6>& all_perms() {
  static const std::array<Perm, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  return perms;
}

int perm_index(const Perm& perm) {
  const auto& ps = all_perms();
  for (int k = 0; k < 6; ++k) {
    if (ps[k] == perm) return k;
  }
  throw std::invalid_argument("perm_index: not a permutation of (0,1,2)");
}

std::array<double, 2> aipw_arm_means(const Eigen::Ref<const Eigen::VectorXd>& A,
                                     const Eigen::Ref<const Eigen::VectorXd>& y,
                                     const Eigen::Ref<const Eigen::VectorXd>& ps,
                                     const Eigen::Ref<const Eigen::VectorXd>& m1,
                                     const Eigen::Ref<const Eigen::VectorXd>& m0) {
  const Eigen::Index n = A.size();
  if (n == 0 || y.size() != n || ps.size() != n || m1.size() != n || m0.size() != n) {
    throw std::invalid_argument("aipw_arm_means: dimension mismatch");
  }
  double s1 = 0.0, s0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = A[i], e = ps[i];
    s1 += a * y[i] / e - (a - e) / e * m1[i];
    s0 += (1.0 - a) * y[i] / (1.0 - e) + (a - e) / (1.0 - e) * m0[i];
  }
  return {s1 / static_cast<double>(n), s0 / static_cast<double>(n)};
}

namespace {

struct SplitView {
  Eigen::Ref<const Eigen::MatrixXd> X;
  Eigen::Ref<const Eigen::VectorXd> A;
  Eigen::Ref<const Eigen::VectorXd> y;
};

SplitView split_view(const Dataset& d, int s) {
  return {d.X.middleRows(d.split_begin[s], d.split_size[s]), d.A.segment(d.split_begin[s], d.split_size[s]),
          d.y.segment(d.split_begin[s], d.split_size[s])};
}

bool ps_usable(const SplitNuisance& n) { return n.ps.converged; }
bool or_usable(const SplitNuisance& n) { return n.or1.unique && n.or0.unique; }

}  // namespace

SplitNuisance fit_split_nuisance(const Dataset& data, int split, const ProblemConfig& config) {
  SplitView v = split_view(data, split);
  LogisticOptions opts;
  opts.gamma_sq_cap = config.gamma > 0.0 ? config.gamma * config.gamma : 1.0;
  SplitNuisance out;
  out.ps = fit_logistic(v.X, v.A, config.ps_method.penalty(), opts);
  out.or1 = fit_ols(v.X, v.y, v.A, 1);
  out.or0 = fit_ols(v.X, v.y, v.A, 0);
  return out;
}

std::vector<CrossFitResult> crossfit_aipw_multi(const Dataset& data, const ProblemConfig& config,
                                                const std::vector<double>& winsor_levels) {
  std::array<SplitNuisance, 3> nuis;
  for (int s = 0; s < 3; ++s) nuis[s] = fit_split_nuisance(data, s, config);

  std::vector<CrossFitResult> out(winsor_levels.size());
  for (auto& r : out) r.valid = true;

  for (int k = 0; k < 6; ++k) {
    const Perm& perm = all_perms()[k];
    const int a = perm[0], b = perm[1], c = perm[2];
    PreCrossFit pre;
    pre.perm = perm;
    pre.ps_exists = ps_usable(nuis[a]);
    pre.or_unique = or_usable(nuis[b]);
    if (!pre.ps_exists || !pre.or_unique) {
      for (auto& r : out) {
        r.prefits[k] = pre;
        if (r.valid) r.failing_perm = k;
        r.valid = false;
      }
      continue;
    }
    SplitView ev = split_view(data, c);
    Eigen::VectorXd raw_ps = predict_propensity(nuis[a].ps, ev.X);
    Eigen::VectorXd m1 = (ev.X * nuis[b].or1.coef).array() + nuis[b].or1.intercept;
    Eigen::VectorXd m0 = (ev.X * nuis[b].or0.coef).array() + nuis[b].or0.intercept;
    for (std::size_t w = 0; w < winsor_levels.size(); ++w) {
      Eigen::VectorXd ps = winsorize(raw_ps, winsor_levels[w]);
      auto means = aipw_arm_means(ev.A, ev.y, ps, m1, m0);
      PreCrossFit p = pre;
      p.delta1 = means[0];
      p.delta0 = means[1];
      p.delta = p.delta1 - p.delta0;
      out[w].prefits[k] = p;
    }
  }
  for (auto& r : out) {
    double sum = 0.0;
    for (const auto& p : r.prefits) sum += p.delta;
    r.delta_cf = r.valid ? sum / 6.0 : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

CrossFitResult crossfit_aipw(const Dataset& data, const ProblemConfig& config) {
  return crossfit_aipw_multi(data, config, {config.winsor_eps}).front();
}

PreCrossFit aipw_prefit(const Dataset& data, const Perm& perm, const ProblemConfig& config) {
  perm_index(perm);
  SplitNuisance ps_fit = fit_split_nuisance(data, perm[0], config);
  SplitNuisance or_fit = fit_split_nuisance(data, perm[1], config);
  PreCrossFit pre;
  pre.perm = perm;
  pre.ps_exists = ps_usable(ps_fit);
  pre.or_unique = or_usable(or_fit);
  if (!pre.ps_exists || !pre.or_unique) {
    pre.delta1 = pre.delta0 = pre.delta = std::numeric_limits<double>::quiet_NaN();
    return pre;
  }
  SplitView ev = split_view(data, perm[2]);
  Eigen::VectorXd ps = winsorize(predict_propensity(ps_fit.ps, ev.X), config.winsor_eps);
  Eigen::VectorXd m1 = (ev.X * or_fit.or1.coef).array() + or_fit.or1.intercept;
  Eigen::VectorXd m0 = (ev.X * or_fit.or0.coef).array() + or_fit.or0.intercept;
  auto means = aipw_arm_means(ev.A, ev.y, ps, m1, m0);
  pre.delta1 = means[0];
  pre.delta0 = means[1];
  pre.delta = pre.delta1 - pre.delta0;
  return pre;
}

namespace {

enum class PairKind { diagonal, within, cyclic, transposed };

PairKind pair_kind(int i, int j) {
  if (i == j) return PairKind::diagonal;
  const Perm& u = all_perms()[i];
  const Perm& v = all_perms()[j];
  if (u[2] == v[2]) return PairKind::within;
  const Perm shift1{u[2], u[0], u[1]};
  const Perm shift2{u[1], u[2], u[0]};
  if (v == shift1 || v == shift2) return PairKind::cyclic;
  return PairKind::transposed;
}

double standard_error(const std::vector<double>& x) {
  const double m = static_cast<double>(x.size());
  if (x.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= m;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (m - 1.0) / m);
}

}  // namespace

CovDecomposition decompose_covariance(const std::vector<std::array<double, 6>>& scaled_errors) {
  if (scaled_errors.size() < 2) throw std::invalid_argument("decompose_covariance: need at least 2 replicates");
  CovDecomposition out;
  const std::size_t R = scaled_errors.size();
  out.replicates = static_cast<int>(R);
  std::vector<double> vs(R), ws(R), bs(R), ts(R);
  double cyc = 0.0, tra = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    const auto& e = scaled_errors[r];
    double v = 0.0, w = 0.0, b = 0.0, t = 0.0;
    for (int i = 0; i < 6; ++i) {
      if (!std::isfinite(e[i])) throw std::invalid_argument("decompose_covariance: non-finite entry");
      for (int j = 0; j < 6; ++j) {
        const double prod = e[i] * e[j];
        out.second_moment(i, j) += prod;
        switch (pair_kind(i, j)) {
          case PairKind::diagonal: v += prod; break;
          case PairKind::within: w += prod; break;
          case PairKind::cyclic: b += prod; cyc += prod; break;
          case PairKind::transposed: b += prod; tra += prod; break;
        }
        t += prod;
      }
    }
    vs[r] = v;
    ws[r] = w;
    bs[r] = b;
    ts[r] = t;
  }
  const double inv = 1.0 / static_cast<double>(R);
  out.second_moment *= inv;
  for (std::size_t r = 0; r < R; ++r) {
    out.var_sum += vs[r];
    out.within_pair += ws[r];
    out.between_pair += bs[r];
  }
  out.var_sum *= inv;
  out.within_pair *= inv;
  out.between_pair *= inv;
  out.between_cyclic = cyc * inv;
  out.between_transposed = tra * inv;
  out.total = out.var_sum + out.within_pair + out.between_pair;
  out.var_sum_se = standard_error(vs);
  out.within_pair_se = standard_error(ws);
  out.between_pair_se = standard_error(bs);
  out.total_se = standard_error(ts);
  return out;
}

}  // namespace hdaipw
