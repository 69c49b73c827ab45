#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdaipw/config.hpp"
#include "hdaipw/csv.hpp"
#include "hdaipw/dgp.hpp"
#include "hdaipw/estimator.hpp"

namespace hdaipw {

enum class ExperimentKind {
  variance_inflation,
  qq,
  ratio_curves,
  between_pair,
  loocv_curve,
  robustness,
  ols_existence,
  se_validation
};

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);
const std::vector<ExperimentKind>& all_experiment_kinds();

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::qq;
  ProblemConfig base;
  int reps = 1000;
  int outer_reps = 50;
  std::vector<double> grid;   // kind-specific grid; empty selects the default
  std::vector<double> gammas; // ratio_curves / between_pair; empty selects the default
  std::string out_dir = ".";
  int threads = 1;

  void validate() const;
};

/// Default base configuration of each experiment at the given (n, p) reduction factor.
ExperimentSpec default_spec(ExperimentKind kind, double scale = 3.0);

struct ExperimentResult {
  CsvWriter table;
  nlohmann::json summary;
};

/// Runs fn(0..count-1) on `threads` workers; the first exception is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

/// Scaled errors sqrt(n)(delta_k - Delta) of one cross-fit replicate at several winsor levels.
struct ReplicateOutcome {
  std::vector<std::array<double, 6>> errors;  // one row per winsor level
  std::vector<double> delta_cf;
  bool valid = false;
};

ReplicateOutcome run_replicate(const ProblemConfig& config, const SignalSet& signals, std::uint64_t stream_seed,
                               std::size_t index, const std::vector<double>& winsor_levels);

/// Replicates 0..reps-1 under one signal draw, merged in index order.
std::vector<ReplicateOutcome> run_replicates(const ProblemConfig& config, const SignalSet& signals,
                                             std::uint64_t stream_seed, int reps,
                                             const std::vector<double>& winsor_levels, int threads);

ExperimentResult run_variance_inflation(const ExperimentSpec& spec);
ExperimentResult run_qq(const ExperimentSpec& spec);
ExperimentResult run_ratio_curves(const ExperimentSpec& spec);
ExperimentResult run_between_pair(const ExperimentSpec& spec);
ExperimentResult run_loocv_curve(const ExperimentSpec& spec);
ExperimentResult run_robustness(const ExperimentSpec& spec);
ExperimentResult run_ols_existence(const ExperimentSpec& spec);
ExperimentResult run_se_validation(const ExperimentSpec& spec);

ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Writes <out_dir>/<kind>.csv and merges the summary under key <kind> into <out_dir>/summary.json.
/// Returns the CSV path.
std::string write_outputs(const ExperimentSpec& spec, const ExperimentResult& result);

double sample_sd(const std::vector<double>& x);

}  // namespace hdaipw
