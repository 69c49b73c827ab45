#include "hdaipw/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "hdaipw/nuisance.hpp"
#include "hdaipw/rng.hpp"
#include "hdaipw/state_evolution.hpp"
#include "hdaipw/variance_oracle.hpp"

namespace hdaipw {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::pair<ExperimentKind, std::string>>& kind_names() {
  static const std::vector<std::pair<ExperimentKind, std::string>> names{
      {ExperimentKind::variance_inflation, "variance_inflation"},
      {ExperimentKind::qq, "qq"},
      {ExperimentKind::ratio_curves, "ratio_curves"},
      {ExperimentKind::between_pair, "between_pair"},
      {ExperimentKind::loocv_curve, "loocv_curve"},
      {ExperimentKind::robustness, "robustness"},
      {ExperimentKind::ols_existence, "ols_existence"},
      {ExperimentKind::se_validation, "se_validation"}};
  return names;
}

double mean_of(const std::vector<double>& x) {
  if (x.empty()) return kNaN;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double mean_se(const std::vector<double>& x) {
  return x.size() < 2 ? kNaN : sample_sd(x) / std::sqrt(static_cast<double>(x.size()));
}

nlohmann::json json_number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

std::vector<double> or_default(const std::vector<double>& v, std::vector<double> fallback) {
  return v.empty() ? fallback : v;
}

// sqrt(n)(delta_cf - Delta) of the valid replicates at winsor level w.
std::vector<double> cf_errors(const std::vector<ReplicateOutcome>& reps, std::size_t w) {
  std::vector<double> out;
  for (const auto& r : reps) {
    if (!r.valid) continue;
    double s = 0.0;
    for (double e : r.errors[w]) s += e;
    out.push_back(s / 6.0);
  }
  return out;
}

int count_dropped(const std::vector<ReplicateOutcome>& reps) {
  int d = 0;
  for (const auto& r : reps) d += r.valid ? 0 : 1;
  return d;
}

std::vector<double> normal_quantiles(std::size_t m) {
  const boost::math::normal_distribution<double> normal;
  std::vector<double> q(m);
  for (std::size_t i = 0; i < m; ++i) q[i] = boost::math::quantile(normal, (i + 0.5) / static_cast<double>(m));
  return q;
}

nlohmann::json decomposition_json(const CovDecomposition& d) {
  return {{"var_sum", d.var_sum},
          {"within_pair", d.within_pair},
          {"between_pair", d.between_pair},
          {"between_cyclic", d.between_cyclic},
          {"between_transposed", d.between_transposed},
          {"total", d.total},
          {"var_sum_se", d.var_sum_se},
          {"within_pair_se", d.within_pair_se},
          {"between_pair_se", d.between_pair_se},
          {"total_se", d.total_se},
          {"replicates", d.replicates}};
}

std::vector<std::array<double, 6>> valid_errors(const std::vector<ReplicateOutcome>& reps, std::size_t w) {
  std::vector<std::array<double, 6>> out;
  for (const auto& r : reps) {
    if (r.valid) out.push_back(r.errors[w]);
  }
  return out;
}

struct QqBlock {
  nlohmann::json summary;
};

// Shared body of qq and robustness: simulate, standardize, pair with normal quantiles.
QqBlock qq_block(const ExperimentSpec& spec, const ProblemConfig& config, const std::string& label, CsvWriter& table,
                 bool with_family_column) {
  const VarianceReport theory = sigma_cf(config);
  Rng srng = make_rng(config.seed, "signals", 0);
  const SignalSet signals = draw_signals(config, srng);
  const std::vector<double> levels{config.winsor_eps, 0.0};
  const char* variant_names[] = {"winsorized", "raw"};
  const auto reps =
      run_replicates(config, signals, derive_seed(config.seed, "qq", 0), spec.reps, levels, spec.threads);

  QqBlock block;
  block.summary["theory"] = theory.to_json();
  block.summary["winsor_eps"] = config.winsor_eps;
  block.summary["reps"] = spec.reps;
  block.summary["dropped"] = count_dropped(reps);
  block.summary["dropped_fraction"] = static_cast<double>(count_dropped(reps)) / std::max(1, spec.reps);
  for (std::size_t w = 0; w < levels.size(); ++w) {
    std::vector<double> err = cf_errors(reps, w);
    nlohmann::json vs;
    vs["valid"] = err.size();
    vs["mean"] = json_number(mean_of(err));
    const double sd = err.size() >= 2 ? sample_sd(err) : kNaN;
    vs["sd_empirical"] = json_number(sd);
    vs["sd_ratio_theory"] = json_number(sd / theory.sigma_cf());
    vs["sd_ratio_classical"] = json_number(sd / theory.sigma_classical());
    if (err.size() >= 2) vs["decomposition"] = decomposition_json(decompose_covariance(valid_errors(reps, w)));
    block.summary[variant_names[w]] = vs;

    std::sort(err.begin(), err.end());
    const std::vector<double> q = normal_quantiles(err.size());
    for (std::size_t i = 0; i < err.size(); ++i) {
      std::vector<CsvCell> row;
      if (with_family_column) row.emplace_back(label);
      row.emplace_back(std::string(variant_names[w]));
      row.emplace_back(static_cast<long long>(i));
      row.emplace_back(q[i]);
      row.emplace_back(err[i] / theory.sigma_cf());
      row.emplace_back(err[i] / theory.sigma_classical());
      table.add_row(std::move(row));
    }
  }
  return block;
}

}  // namespace

std::string to_string(ExperimentKind k) {
  for (const auto& [kind, name] : kind_names()) {
    if (kind == k) return name;
  }
  throw std::invalid_argument("unknown experiment kind");
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kind_names()) {
    if (name == s) return kind;
  }
  throw std::invalid_argument("unknown experiment kind: " + s);
}

const std::vector<ExperimentKind>& all_experiment_kinds() {
  static const std::vector<ExperimentKind> kinds = [] {
    std::vector<ExperimentKind> v;
    for (const auto& kv : kind_names()) v.push_back(kv.first);
    return v;
  }();
  return kinds;
}

void ExperimentSpec::validate() const {
  base.validate();
  if (reps < 0 || outer_reps < 1) throw std::invalid_argument("ExperimentSpec: reps >= 0 and outer_reps >= 1 required");
  const bool needs_variance = kind == ExperimentKind::variance_inflation || kind == ExperimentKind::qq ||
                              kind == ExperimentKind::robustness || kind == ExperimentKind::se_validation;
  if (needs_variance && reps < 2) throw std::invalid_argument("ExperimentSpec: reps >= 2 required for a variance");
  if (threads < 0) throw std::invalid_argument("ExperimentSpec: threads must be >= 0");
}

ExperimentSpec default_spec(ExperimentKind kind, double scale) {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.base = reference_config(scale);
  switch (kind) {
    case ExperimentKind::variance_inflation:
      spec.reps = 1000;
      spec.outer_reps = 50;
      break;
    case ExperimentKind::qq:
    case ExperimentKind::robustness:
      spec.reps = 1000;
      break;
    case ExperimentKind::ratio_curves:
      spec.reps = 0;
      break;
    case ExperimentKind::between_pair:
      spec.reps = 1000;
      break;
    case ExperimentKind::loocv_curve:
      spec.reps = 500;
      spec.base.ps_method = PsMethod::ridge(1.0);
      break;
    case ExperimentKind::ols_existence:
      spec.reps = 100;
      spec.base.p = 200;
      break;
    case ExperimentKind::se_validation: {
      spec.reps = 200;
      ProblemConfig c = spec.base;
      c.n = 8000;
      c.p = 1680;
      c.split_sizes = equal_splits(c.n);
      c.gamma = 1.0;
      spec.base = c;
      break;
    }
  }
  return spec;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  if (workers <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

double sample_sd(const std::vector<double>& x) {
  if (x.size() < 2) throw std::invalid_argument("sample_sd: need at least two values");
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

ReplicateOutcome run_replicate(const ProblemConfig& config, const SignalSet& signals, std::uint64_t stream_seed,
                               std::size_t index, const std::vector<double>& winsor_levels) {
  Rng rng = make_rng(stream_seed, "data", index);
  const Dataset data = draw_dataset(config, signals, rng);
  const auto fits = crossfit_aipw_multi(data, config, winsor_levels);
  ReplicateOutcome out;
  out.valid = fits.front().valid;
  const double root_n = std::sqrt(static_cast<double>(config.n));
  for (const auto& f : fits) {
    std::array<double, 6> e{};
    for (int k = 0; k < 6; ++k) e[k] = out.valid ? root_n * (f.prefits[k].delta - config.ate()) : kNaN;
    out.errors.push_back(e);
    out.delta_cf.push_back(f.delta_cf);
  }
  return out;
}

std::vector<ReplicateOutcome> run_replicates(const ProblemConfig& config, const SignalSet& signals,
                                             std::uint64_t stream_seed, int reps,
                                             const std::vector<double>& winsor_levels, int threads) {
  std::vector<ReplicateOutcome> out(static_cast<std::size_t>(reps));
  parallel_for(out.size(), threads,
               [&](std::size_t i) { out[i] = run_replicate(config, signals, stream_seed, i, winsor_levels); });
  return out;
}

ExperimentResult run_variance_inflation(const ExperimentSpec& spec) {
  spec.validate();
  const ProblemConfig& config = spec.base;
  const VarianceReport theory = sigma_cf(config);
  ExperimentResult res{CsvWriter({"outer_idx", "sd_empirical", "sd_classical", "sd_theory", "valid", "dropped"}), {}};
  std::vector<double> sds;
  int dropped = 0;
  for (int o = 0; o < spec.outer_reps; ++o) {
    Rng srng = make_rng(config.seed, "signals", static_cast<std::uint64_t>(o));
    const SignalSet signals = draw_signals(config, srng);
    const auto reps = run_replicates(config, signals, derive_seed(config.seed, "outer", o), spec.reps,
                                     {config.winsor_eps}, spec.threads);
    const std::vector<double> err = cf_errors(reps, 0);
    const double sd = err.size() >= 2 ? sample_sd(err) : kNaN;
    sds.push_back(sd);
    dropped += count_dropped(reps);
    res.table.add_row({static_cast<long long>(o), sd, theory.sigma_classical(), theory.sigma_cf(),
                       static_cast<long long>(err.size()), static_cast<long long>(count_dropped(reps))});
  }
  res.summary["theory"] = theory.to_json();
  res.summary["reps"] = spec.reps;
  res.summary["outer_reps"] = spec.outer_reps;
  res.summary["dropped"] = dropped;
  res.summary["dropped_fraction"] = static_cast<double>(dropped) / (static_cast<double>(spec.reps) * spec.outer_reps);
  res.summary["mean_sd_empirical"] = json_number(mean_of(sds));
  return res;
}

ExperimentResult run_qq(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult res{CsvWriter({"variant", "rank", "normal_quantile", "z_theory", "z_classical"}), {}};
  res.summary = qq_block(spec, spec.base, "", res.table, false).summary;
  return res;
}

ExperimentResult run_robustness(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult res{CsvWriter({"family", "variant", "rank", "normal_quantile", "z_theory", "z_classical"}), {}};
  for (CovariateFamily fam : {CovariateFamily::uniform, CovariateFamily::hwe_discrete}) {
    ProblemConfig c = spec.base;
    c.covariate_family = fam;
    res.summary[to_string(fam)] = qq_block(spec, c, to_string(fam), res.table, true).summary;
  }
  return res;
}

ExperimentResult run_ratio_curves(const ExperimentSpec& spec) {
  spec.validate();
  const std::vector<double> gammas = or_default(spec.gammas, {0.2, 0.4, 0.6, 0.8});
  const std::vector<double> grid =
      or_default(spec.grid, {0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16});
  SeCache cache;
  std::vector<RatioPoint> points(gammas.size() * grid.size());
  parallel_for(points.size(), spec.threads, [&](std::size_t i) {
    points[i] = f_ratio_curve(gammas[i / grid.size()], {grid[i % grid.size()]}, spec.base, &cache).front();
  });
  ExperimentResult res{CsvWriter({"kappa", "gamma", "feasible", "f_value", "inv_sigma", "log_f_ratio",
                                  "log_total_ratio", "reason"}),
                       {}};
  int skipped = 0;
  for (const auto& pt : points) {
    skipped += pt.feasible ? 0 : 1;
    res.table.add_row({pt.kappa, pt.gamma, static_cast<long long>(pt.feasible), pt.feasible ? pt.f_value : kNaN,
                       pt.feasible ? pt.inv_sigma : kNaN, pt.feasible ? pt.log_f_ratio : kNaN,
                       pt.feasible ? pt.log_total_ratio : kNaN, pt.reason});
  }
  res.summary["points"] = points.size();
  res.summary["skipped"] = skipped;
  res.summary["gammas"] = gammas;
  res.summary["kappa_grid"] = grid;
  return res;
}

ExperimentResult run_between_pair(const ExperimentSpec& spec) {
  spec.validate();
  const std::vector<double> gammas = or_default(spec.gammas, {0.2, 0.5, 0.8});
  const std::vector<double> grid = or_default(spec.grid, {0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16});
  SeCache cache;
  std::vector<RatioPoint> points(gammas.size() * grid.size());
  parallel_for(points.size(), spec.threads, [&](std::size_t i) {
    points[i] = f_ratio_curve(gammas[i / grid.size()], {grid[i % grid.size()]}, spec.base, &cache).front();
  });
  ExperimentResult res{CsvWriter({"source", "kappa", "gamma", "feasible", "theory", "empirical", "mc_se",
                                  "empirical_cyclic", "empirical_transposed", "reps"}),
                       {}};
  for (const auto& pt : points) {
    res.table.add_row({std::string("theory_grid"), pt.kappa, pt.gamma, static_cast<long long>(pt.feasible),
                       pt.feasible ? pt.between_pair_theory : kNaN, kNaN, kNaN, kNaN, kNaN, 0LL});
  }
  nlohmann::json grid_json = nlohmann::json::array();
  for (const auto& pt : points) {
    grid_json.push_back({{"kappa", pt.kappa},
                         {"gamma", pt.gamma},
                         {"feasible", pt.feasible},
                         {"theory", pt.feasible ? json_number(pt.between_pair_theory) : nlohmann::json(nullptr)},
                         {"reason", pt.reason}});
  }
  res.summary["grid"] = grid_json;

  if (spec.reps >= 2) {
    const ProblemConfig& config = spec.base;
    const VarianceReport theory = sigma_cf(config, &cache);
    Rng srng = make_rng(config.seed, "signals", 0);
    const SignalSet signals = draw_signals(config, srng);
    const auto reps = run_replicates(config, signals, derive_seed(config.seed, "qq", 0), spec.reps,
                                     {config.winsor_eps}, spec.threads);
    const auto errs = valid_errors(reps, 0);
    if (errs.size() >= 2) {
      const CovDecomposition d = decompose_covariance(errs);
      res.table.add_row({std::string("monte_carlo"), config.kappa(), config.gamma, 1LL, theory.between_pair_theory,
                         d.between_pair, d.between_pair_se, d.between_cyclic, d.between_transposed,
                         static_cast<long long>(d.replicates)});
      res.summary["monte_carlo"] = {{"theory", theory.between_pair_theory},
                                    {"decomposition", decomposition_json(d)},
                                    {"z_score", (d.between_pair - theory.between_pair_theory) / d.between_pair_se},
                                    {"dropped", count_dropped(reps)}};
    }
  }
  return res;
}

ExperimentResult run_loocv_curve(const ExperimentSpec& spec) {
  spec.validate();
  const std::vector<double> grid = or_default(spec.grid, default_lambda_grid());
  ProblemConfig base = spec.base;
  SeCache cache;

  std::vector<double> sd_theory(grid.size());
  parallel_for(grid.size(), spec.threads, [&](std::size_t i) {
    ProblemConfig c = base;
    c.ps_method = PsMethod::ridge(grid[i]);
    sd_theory[i] = sigma_cf(c, &cache).sigma_cf();
  });
  ProblemConfig mle = base;
  mle.ps_method = PsMethod::mle();
  double sd_mle = kNaN;
  try {
    sd_mle = sigma_cf(mle, &cache).sigma_cf();
  } catch (const InfeasibleError&) {
  }

  // approximate LOOCV on the propensity split of one dataset
  Rng srng = make_rng(base.seed, "signals", 0);
  const SignalSet signals = draw_signals(base, srng);
  Rng drng = make_rng(base.seed, "loocv", 0);
  const Dataset data = draw_dataset(base, signals, drng);
  const auto X = data.X.middleRows(data.split_begin[0], data.split_size[0]);
  const auto A = data.A.segment(data.split_begin[0], data.split_size[0]);
  std::vector<double> scores(grid.size());
  parallel_for(grid.size(), spec.threads, [&](std::size_t i) { scores[i] = approx_loo_score(X, A, grid[i]); });
  const std::size_t chosen = argmin_score(grid, scores);
  const std::size_t optimal = static_cast<std::size_t>(
      std::min_element(sd_theory.begin(), sd_theory.end()) - sd_theory.begin());

  std::vector<double> sd_emp(grid.size(), kNaN);
  std::vector<long long> valid(grid.size(), 0);
  if (spec.reps >= 2) {
    std::vector<std::size_t> targets{chosen};
    if (optimal != chosen) targets.push_back(optimal);
    for (std::size_t i : targets) {
      ProblemConfig c = base;
      c.ps_method = PsMethod::ridge(grid[i]);
      const auto reps = run_replicates(c, signals, derive_seed(base.seed, "loocv-mc", i), spec.reps,
                                       {c.winsor_eps}, spec.threads);
      const auto err = cf_errors(reps, 0);
      valid[i] = static_cast<long long>(err.size());
      if (err.size() >= 2) sd_emp[i] = sample_sd(err);
    }
  }

  ExperimentResult res{CsvWriter({"lambda", "sd_theory", "loo_score", "chosen_by_loocv", "theory_optimal",
                                  "sd_empirical", "valid_reps"}),
                       {}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    res.table.add_row({grid[i], sd_theory[i], scores[i], static_cast<long long>(i == chosen),
                       static_cast<long long>(i == optimal), sd_emp[i], valid[i]});
  }
  res.summary["lambda_loocv"] = grid[chosen];
  res.summary["lambda_optimal"] = grid[optimal];
  res.summary["sd_theory_loocv"] = sd_theory[chosen];
  res.summary["sd_theory_optimal"] = sd_theory[optimal];
  res.summary["sd_theory_mle"] = json_number(sd_mle);
  res.summary["excess_ratio"] = sd_theory[chosen] / sd_theory[optimal] - 1.0;
  res.summary["sd_empirical_loocv"] = json_number(sd_emp[chosen]);
  return res;
}

ExperimentResult run_ols_existence(const ExperimentSpec& spec) {
  spec.validate();
  const std::vector<double> grid = or_default(spec.grid, {0.2, 0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7});
  const ProblemConfig& base = spec.base;
  const int p = base.p;
  ExperimentResult res{CsvWriter({"kappa_b", "rows", "reps", "unique_rate", "treated_unique_rate",
                                  "control_unique_rate"}),
                       {}};
  nlohmann::json rates = nlohmann::json::array();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double kb = grid[g];
    if (!(kb > 0.0)) throw std::invalid_argument("ols_existence: kappa_b must be positive");
    const int m = static_cast<int>(std::lround(p / kb));
    std::vector<std::array<int, 2>> unique(static_cast<std::size_t>(spec.reps));
    parallel_for(unique.size(), spec.threads, [&](std::size_t r) {
      Rng rng = make_rng(base.seed, "ols-existence", g * 1000003ULL + r);
      const Eigen::MatrixXd X = draw_covariates(base.covariate_family, m, p, m, rng);
      std::normal_distribution<double> nd(0.0, 1.0);
      Eigen::VectorXd beta(p);
      for (int j = 0; j < p; ++j) beta[j] = nd(rng);
      if (base.gamma > 0.0) {
        beta *= base.gamma * std::sqrt(static_cast<double>(m)) / beta.norm();
      } else {
        beta.setZero();
      }
      const Eigen::VectorXd eta = X * beta;
      std::uniform_real_distribution<double> ud(0.0, 1.0);
      Eigen::VectorXd A(m), y(m);
      for (int i = 0; i < m; ++i) {
        A[i] = ud(rng) < sigmoid(eta[i]) ? 1.0 : 0.0;
        y[i] = nd(rng);
      }
      unique[r] = {fit_ols(X, y, A, 1).unique ? 1 : 0, fit_ols(X, y, A, 0).unique ? 1 : 0};
    });
    double both = 0, t1 = 0, t0 = 0;
    for (const auto& u : unique) {
      t1 += u[0];
      t0 += u[1];
      both += u[0] * u[1];
    }
    const double R = std::max(1, spec.reps);
    res.table.add_row({kb, static_cast<long long>(m), static_cast<long long>(spec.reps), both / R, t1 / R, t0 / R});
    rates.push_back({{"kappa_b", kb}, {"rows", m}, {"unique_rate", both / R}});
  }
  res.summary["p"] = p;
  res.summary["rates"] = rates;
  return res;
}

ExperimentResult run_se_validation(const ExperimentSpec& spec) {
  spec.validate();
  const ProblemConfig& base = spec.base;
  const std::vector<double> ridge = or_default(spec.grid, {0.5});
  const int n = base.n, p = base.p;
  const double kappa = static_cast<double>(p) / n;
  std::vector<double> lambdas{0.0};
  lambdas.insert(lambdas.end(), ridge.begin(), ridge.end());

  struct Fit {
    bool exists = false;
    double alpha = kNaN, m2 = kNaN;
  };
  std::vector<std::vector<Fit>> fits(static_cast<std::size_t>(spec.reps), std::vector<Fit>(lambdas.size()));
  parallel_for(fits.size(), spec.threads, [&](std::size_t r) {
    Rng rng = make_rng(base.seed, "se-validation", r);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd beta(p);
    for (int j = 0; j < p; ++j) beta[j] = nd(rng);
    beta *= base.gamma * std::sqrt(static_cast<double>(n)) / beta.norm();
    const Eigen::MatrixXd X = draw_covariates(base.covariate_family, n, p, n, rng);
    const Eigen::VectorXd eta = X * beta;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    Eigen::VectorXd A(n);
    for (int i = 0; i < n; ++i) A[i] = ud(rng) < sigmoid(eta[i]) ? 1.0 : 0.0;
    LogisticOptions opts;
    opts.gamma_sq_cap = base.gamma * base.gamma;
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      const LogisticFit f = fit_logistic(X, A, lambdas[k], opts);
      Fit out;
      out.exists = f.converged && f.exists;
      if (out.exists) {
        out.alpha = f.coef.dot(beta) / beta.squaredNorm();
        out.m2 = f.coef.squaredNorm() / n;
      }
      fits[r][k] = out;
    }
  });

  ExperimentResult res{CsvWriter({"method", "lambda", "rep", "exists", "alpha_hat", "m2_hat"}), {}};
  nlohmann::json methods = nlohmann::json::array();
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const std::string name = lambdas[k] > 0.0 ? "ridge" : "mle";
    std::vector<double> al, m2;
    for (std::size_t r = 0; r < fits.size(); ++r) {
      const Fit& f = fits[r][k];
      res.table.add_row({name, lambdas[k], static_cast<long long>(r), static_cast<long long>(f.exists), f.alpha, f.m2});
      if (f.exists) {
        al.push_back(f.alpha);
        m2.push_back(f.m2);
      }
    }
    nlohmann::json m{{"method", name}, {"lambda", lambdas[k]}, {"fits", al.size()}};
    try {
      const SeParams se = solve_se(kappa, base.gamma, lambdas[k]);
      const double m2_theory = kappa * se.sigma_star * se.sigma_star + se.alpha_star * se.alpha_star * base.gamma *
                                                                           base.gamma;
      m["alpha_theory"] = se.alpha_star;
      m["m2_theory"] = m2_theory;
      m["alpha_mc"] = json_number(mean_of(al));
      m["alpha_mc_se"] = json_number(mean_se(al));
      m["m2_mc"] = json_number(mean_of(m2));
      m["m2_mc_se"] = json_number(mean_se(m2));
      m["alpha_rel_err"] = json_number(mean_of(al) / se.alpha_star - 1.0);
      m["m2_rel_err"] = json_number(mean_of(m2) / m2_theory - 1.0);
    } catch (const std::runtime_error& e) {
      m["theory_error"] = e.what();
    }
    methods.push_back(m);
  }
  res.summary["n"] = n;
  res.summary["p"] = p;
  res.summary["gamma"] = base.gamma;
  res.summary["methods"] = methods;
  return res;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::variance_inflation: return run_variance_inflation(spec);
    case ExperimentKind::qq: return run_qq(spec);
    case ExperimentKind::ratio_curves: return run_ratio_curves(spec);
    case ExperimentKind::between_pair: return run_between_pair(spec);
    case ExperimentKind::loocv_curve: return run_loocv_curve(spec);
    case ExperimentKind::robustness: return run_robustness(spec);
    case ExperimentKind::ols_existence: return run_ols_existence(spec);
    case ExperimentKind::se_validation: return run_se_validation(spec);
  }
  throw std::invalid_argument("run_experiment: unknown kind");
}

std::string write_outputs(const ExperimentSpec& spec, const ExperimentResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(spec.out_dir);
  const std::string name = to_string(spec.kind);
  const fs::path csv = fs::path(spec.out_dir) / (name + ".csv");
  result.table.write_file(csv.string());

  const fs::path summary_path = fs::path(spec.out_dir) / "summary.json";
  nlohmann::json summary = nlohmann::json::object();
  {
    std::ifstream in(summary_path);
    if (in) {
      try {
        summary = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception&) {
        summary = nlohmann::json::object();
      }
    }
  }
  nlohmann::json entry = result.summary;
  entry["config"] = spec.base;
  entry["reps"] = spec.reps;
  entry["outer_reps"] = spec.outer_reps;
  entry["csv"] = csv.filename().string();
  summary[name] = entry;
  std::ofstream out(summary_path);
  if (!out) throw std::runtime_error("write_outputs: cannot write " + summary_path.string());
  out << summary.dump(1) << '\n';
  return csv.string();
}

}  // namespace hdaipw
