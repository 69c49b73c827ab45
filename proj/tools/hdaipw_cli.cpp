#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hdaipw/experiments.hpp"

namespace {

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int reps = -1;
  int outer_reps = -1;
  std::string out_dir = "results";
  double scale = 3.0;
  int threads = 0;
  bool full_scale = false;
  std::vector<double> grid;
  std::vector<double> gammas;
};

int run(hdaipw::ExperimentKind kind, const Options& o) {
  using namespace hdaipw;
  ExperimentSpec spec = default_spec(kind, o.full_scale ? 1.0 : o.scale);
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw std::runtime_error("cannot read config file " + o.config_path);
    spec.base = config_from_json(nlohmann::json::parse(in), spec.base);
  }
  if (o.seed_set) spec.base.seed = o.seed;
  if (o.reps >= 0) spec.reps = o.reps;
  if (o.outer_reps >= 0) spec.outer_reps = o.outer_reps;
  spec.out_dir = o.out_dir;
  spec.threads = o.threads;
  spec.grid = o.grid;
  spec.gammas = o.gammas;
  const ExperimentResult result = run_experiment(spec);
  const std::string path = write_outputs(spec, result);
  std::cout << "wrote " << path << " (" << result.table.rows() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-fit AIPW variance experiments"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "JSON file with ProblemConfig fields overriding the defaults");
  app.add_option_function<std::uint64_t>(
      "--seed", [&](const std::uint64_t& s) { o.seed = s, o.seed_set = true; }, "master seed");
  app.add_option("--reps", o.reps, "replicates (inner replicates for variance_inflation)");
  app.add_option("--outer-reps", o.outer_reps, "signal draws for variance_inflation");
  app.add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
  app.add_option("--scale", o.scale, "divide the reference (n, p) by this factor")->capture_default_str();
  app.add_option("--threads", o.threads, "worker threads (0 = hardware concurrency)")->capture_default_str();
  app.add_flag("--full-scale", o.full_scale, "use the unreduced reference configuration");
  app.add_option("--grid", o.grid, "experiment grid (kappa, kappa_b or lambda values depending on the kind)");
  app.add_option("--gammas", o.gammas, "signal strengths for ratio_curves and between_pair");

  app.fallthrough();
  hdaipw::ExperimentKind chosen = hdaipw::ExperimentKind::qq;
  for (hdaipw::ExperimentKind k : hdaipw::all_experiment_kinds()) {
    app.add_subcommand(hdaipw::to_string(k))->callback([&chosen, k] { chosen = k; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return run(chosen, o);
  } catch (const hdaipw::InfeasibleError& e) {
    std::cerr << "infeasible configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
