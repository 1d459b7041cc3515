// Command-line front end: generate, solve, experiment, batch-study, plots.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wbsgd/batching.hpp"
#include "wbsgd/harness.hpp"
#include "wbsgd/kernels.hpp"
#include "wbsgd/nonsmooth.hpp"
#include "wbsgd/plots.hpp"
#include "wbsgd/problems.hpp"
#include "wbsgd/smooth.hpp"
#include "wbsgd/textio.hpp"
#include "wbsgd/weighting.hpp"

namespace fs = std::filesystem;
using namespace wbsgd;

namespace {

struct GeneratorOpts {
  std::string family = "gaussian";
  GeneratorSpec spec;
};

void add_generator_options(CLI::App* app, GeneratorOpts& g) {
  app->add_option("--family", g.family,
                  "gaussian | gaussian_var_k2 | correlated_uniform_var_k2 | orthonormal | "
                  "sparse_gaussian | tomography | svm_gaussian")
      ->capture_default_str();
  app->add_option("--n", g.spec.n, "rows")->capture_default_str();
  app->add_option("--m", g.spec.m, "columns")->capture_default_str();
  app->add_option("--noise", g.spec.noise_norm, "norm of the added residual (0: consistent)")
      ->capture_default_str();
  app->add_option("--density", g.spec.density, "nonzero fraction (sparse_gaussian)")
      ->capture_default_str();
  app->add_option("--grid-n", g.spec.grid_n, "tomography grid side N")->capture_default_str();
  app->add_option("--oversample", g.spec.oversample, "tomography rows per cell")
      ->capture_default_str();
  app->add_option("--lambda", g.spec.lambda, "hinge regularization (svm_gaussian)")
      ->capture_default_str();
  app->add_option("--separation", g.spec.svm_separation, "svm cloud separation")
      ->capture_default_str();
}

GeneratorSpec resolve(const GeneratorOpts& g, std::uint64_t seed) {
  GeneratorSpec s = g.spec;
  s.family = parse_family(g.family);
  s.seed = seed;
  return s;
}

template <class T, class F>
std::vector<T> parse_all(const std::vector<std::string>& names, F parse) {
  std::vector<T> out;
  for (const auto& n : names) out.push_back(parse(n));
  return out;
}

struct SolveOpts {
  GeneratorOpts gen;
  std::string problem_dir;
  std::size_t batch_size = 1;
  std::string strategy = "random";
  std::string mode = "weighted";
  std::string estimator = "exact";
  std::string step_estimator;
  double pm_epsilon = 0.01;
  double target = 1e-5;
  double epsilon = 0.0;
  double residual_factor = 1.1;
  double residual_bound = -1.0;
  std::size_t max_iterations = 0;
  std::size_t checkpoint_stride = 0;
  double geometric_ratio = 0.0;
  bool no_early_stop = false;
  double alpha = 0.5;
  std::uint64_t seed = 0;
  std::string out = "out";
};

int run_solve(const SolveOpts& o) {
  const Problem problem = o.problem_dir.empty() ? generate(resolve(o.gen, o.seed))
                                                : load_problem(o.problem_dir);
  const bool ls = std::holds_alternative<LeastSquaresProblem>(problem);
  const DenseMatrix A = ls ? std::get<LeastSquaresProblem>(problem).A
                           : signed_rows(std::get<HingeLossProblem>(problem));
  const Strategy strategy = parse_strategy(o.strategy);
  const Partition P = strategy == Strategy::sequential
                          ? partition_sequential(row_norms_sq(A), o.batch_size)
                          : partition_random(A.rows(), o.batch_size, substream_seed(o.seed, 1));

  SolveConfig cfg;
  cfg.mode = parse_sampling_mode(o.mode);
  cfg.estimator = parse_estimator(o.estimator);
  if (!o.step_estimator.empty()) cfg.step_estimator = parse_estimator(o.step_estimator);
  cfg.pm_epsilon = o.pm_epsilon;
  cfg.epsilon = o.epsilon > 0.0 ? o.epsilon : (ls ? o.target * o.target : o.target);
  cfg.target = o.target;
  cfg.residual_bound_factor = o.residual_factor;
  if (o.residual_bound >= 0.0) cfg.residual_bound = o.residual_bound;
  cfg.seed = substream_seed(o.seed, 2);
  cfg.max_iterations = o.max_iterations;
  cfg.checkpoint_stride = o.checkpoint_stride;
  cfg.geometric_ratio = o.geometric_ratio;
  cfg.stop_at_target = !o.no_early_stop;
  cfg.alpha = o.alpha;

  const RunResult r = ls ? solve_smooth(std::get<LeastSquaresProblem>(problem), P, cfg)
                         : solve_nonsmooth(std::get<HingeLossProblem>(problem), P, cfg);

  const fs::path out = o.out;
  fs::create_directories(out);
  {
    std::ofstream os(out / "trace.csv");
    if (!os) throw Error("cannot write " + (out / "trace.csv").string());
    write_trace_header(os, ls ? TraceMetric::l2_error : TraceMetric::objective_gap);
    write_trace_rows(os, 0, r.trace);
  }
  {
    std::ofstream os(out / "partition.txt");
    write_partition(os, P);
  }
  {
    std::ofstream os(out / "x.txt");
    write_vector(os, r.x);
  }
  std::cout << "iterations " << r.iterations << " of budget " << r.budget << ", predicted "
            << r.predicted_iterations << ", final " << format_real(r.trace.back().value)
            << (r.iterations_to_target ? ", reached target at " +
                                             std::to_string(*r.iterations_to_target)
                                       : std::string(", target not reached"))
            << '\n';
  return 0;
}

struct ExperimentOpts {
  GeneratorOpts gen;
  std::vector<std::size_t> batch_sizes{1, 2, 4, 8};
  std::vector<std::string> strategies{"random"};
  std::vector<std::string> modes{"weighted"};
  std::vector<std::string> estimators{"exact"};
  bool opt = false;
  bool no_baseline = false;
  ExperimentSpec spec;
  double epsilon = 0.0;
  bool no_early_stop = false;
  int threads = 0;
  std::string out = "out";
  bool plots = false;
};

void add_experiment_options(CLI::App* app, ExperimentOpts& o, bool full) {
  add_generator_options(app, o.gen);
  app->add_option("--batch-sizes", o.batch_sizes, "comma-separated batch sizes")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--strategies", o.strategies, "random,sequential")
      ->delimiter(',')
      ->capture_default_str();
  if (full) {
    app->add_option("--modes", o.modes, "weighted,uniform")->delimiter(',')->capture_default_str();
    app->add_option("--estimators", o.estimators, "exact,max_norm,power")
        ->delimiter(',')
        ->capture_default_str();
    app->add_flag("--opt", o.opt, "also run approximate sampling with exact step sizes");
    app->add_flag("--no-baseline", o.no_baseline, "skip the b=1 uniform reference");
    app->add_flag("--no-early-stop", o.no_early_stop, "run the full budget");
    app->add_option("--residual-factor", o.spec.residual_bound_factor,
                    "residual overestimate in the step size")
        ->capture_default_str();
    app->add_option("--checkpoint-stride", o.spec.checkpoint_stride, "0: n/b")
        ->capture_default_str();
    app->add_option("--geometric-ratio", o.spec.geometric_ratio,
                    "geometric checkpoint spacing (>1 enables)")
        ->capture_default_str();
    app->add_option("--alpha", o.spec.alpha, "suffix-average fraction (hinge)")
        ->capture_default_str();
    app->add_flag("--plots", o.plots, "write plot scripts after the run");
  }
  app->add_option("--trials", o.spec.trials, "trials per configuration")->capture_default_str();
  app->add_option("--target", o.spec.target_error, "target l2 error or objective gap")
      ->capture_default_str();
  app->add_option("--epsilon", o.epsilon, "step-size tolerance (default: target^2 for LS)");
  app->add_option("--pm-epsilon", o.spec.pm_epsilon, "power-method accuracy")
      ->capture_default_str();
  app->add_option("--max-epochs", o.spec.max_epochs, "budget in passes of n/b iterations")
      ->capture_default_str();
  app->add_option("--iteration-cap", o.spec.iteration_cap, "ceiling on the predicted budget")
      ->capture_default_str();
  app->add_option("--seed", o.spec.seed, "experiment seed")->capture_default_str();
  app->add_option("--threads", o.threads, "worker threads (0: runtime default)");
  app->add_option("--out", o.out, "output directory")->capture_default_str();
}

ExperimentSpec build_spec(const ExperimentOpts& o) {
  ExperimentSpec spec = o.spec;
  spec.generator = resolve(o.gen, o.spec.seed);
  spec.batch_sizes = o.batch_sizes;
  spec.strategies = parse_all<Strategy>(o.strategies, parse_strategy);
  spec.modes = parse_all<SamplingMode>(o.modes, parse_sampling_mode);
  spec.estimators = parse_all<EstimatorKind>(o.estimators, parse_estimator);
  spec.include_opt = o.opt;
  spec.include_baseline = !o.no_baseline;
  if (o.epsilon > 0.0) spec.epsilon = o.epsilon;
  spec.stop_at_target = !o.no_early_stop;
  spec.out_dir = o.out;
  return spec;
}

void print_censored(const char* label, const CensoredStats& s) {
  std::cout << label << ' ' << format_real(s.median) << " (" << s.reached << '/' << s.trials
            << " reached)";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batched importance-weighted SGD for least squares and hinge loss"};
  app.require_subcommand(1);

  GeneratorOpts gen_opts;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "problem";
  auto* gen = app.add_subcommand("generate", "write a synthetic problem as text files");
  add_generator_options(gen, gen_opts);
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();

  SolveOpts solve_opts;
  auto* solve = app.add_subcommand("solve", "run one solver configuration");
  add_generator_options(solve, solve_opts.gen);
  solve->add_option("--problem", solve_opts.problem_dir, "load a problem written by generate");
  solve->add_option("--batch-size", solve_opts.batch_size, "rows per batch")->capture_default_str();
  solve->add_option("--strategy", solve_opts.strategy, "random | sequential")->capture_default_str();
  solve->add_option("--mode", solve_opts.mode, "weighted | uniform")->capture_default_str();
  solve->add_option("--estimator", solve_opts.estimator, "exact | max_norm | power")
      ->capture_default_str();
  solve->add_option("--step-estimator", solve_opts.step_estimator,
                    "estimator for the step size (default: --estimator)");
  solve->add_option("--pm-epsilon", solve_opts.pm_epsilon, "power-method accuracy")
      ->capture_default_str();
  solve->add_option("--target", solve_opts.target, "target l2 error or objective gap")
      ->capture_default_str();
  solve->add_option("--epsilon", solve_opts.epsilon, "step-size tolerance (default: target^2 for LS)");
  solve->add_option("--residual-factor", solve_opts.residual_factor,
                    "residual overestimate in the step size")
      ->capture_default_str();
  solve->add_option("--residual-bound", solve_opts.residual_bound,
                    "assumed ||Ax*-b|| when no reference solution is available");
  solve->add_option("--max-iterations", solve_opts.max_iterations, "0: 50 epochs")
      ->capture_default_str();
  solve->add_option("--checkpoint-stride", solve_opts.checkpoint_stride, "0: n/b")
      ->capture_default_str();
  solve->add_option("--geometric-ratio", solve_opts.geometric_ratio,
                    "geometric checkpoint spacing (>1 enables)");
  solve->add_flag("--no-early-stop", solve_opts.no_early_stop, "run the full budget");
  solve->add_option("--alpha", solve_opts.alpha, "suffix-average fraction (hinge)")
      ->capture_default_str();
  solve->add_option("--seed", solve_opts.seed, "seed")->capture_default_str();
  solve->add_option("--out", solve_opts.out, "output directory")->capture_default_str();

  ExperimentOpts exp_opts;
  auto* exp = app.add_subcommand("experiment", "multi-trial comparison of configurations");
  add_experiment_options(exp, exp_opts, true);

  ExperimentOpts study_opts;
  study_opts.gen.family = "gaussian_var_k2";
  study_opts.gen.spec.n = 320;
  study_opts.batch_sizes = {1, 2, 4, 8, 16, 32};
  study_opts.strategies = {"sequential"};
  study_opts.spec.target_error = 1e-2;
  auto* study = app.add_subcommand("batch-study", "flops to target against batch size");
  add_experiment_options(study, study_opts, false);

  std::string plot_dir = "out";
  auto* plots = app.add_subcommand("plots", "write plot scripts for an output directory");
  plots->add_option("--dir", plot_dir, "experiment output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }

  try {
    if (*gen) {
      const Problem p = generate(resolve(gen_opts, gen_seed));
      save_problem(gen_out, p);
      std::cout << "wrote " << gen_out << '\n';
    } else if (*solve) {
      return run_solve(solve_opts);
    } else if (*exp) {
      if (exp_opts.threads > 0) kernels::set_threads(exp_opts.threads);
      const ExperimentSpec spec = build_spec(exp_opts);
      const ExperimentResult r = run_experiment(spec);
      for (const auto& c : r.configs) {
        std::cout << c.config.key() << ": ";
        print_censored("median iterations", c.iterations);
        std::cout << ", speedup " << format_real(c.speedup_vs_baseline) << '\n';
      }
      if (exp_opts.plots) {
        const PlotScripts s = emit_plots(spec.out_dir);
        if (!s.message.empty()) std::cout << s.message << '\n';
      }
      std::cout << "wrote " << spec.out_dir.string() << '\n';
    } else if (*study) {
      if (study_opts.threads > 0) kernels::set_threads(study_opts.threads);
      const ExperimentSpec spec = build_spec(study_opts);
      const BatchStudyResult r = optimal_batch_study(spec);
      for (const auto& row : r.rows) {
        std::cout << "b=" << row.batch_size << ": ";
        print_censored("median shared flops", row.flops_shared);
        std::cout << ", single " << format_real(row.flops_single.median) << '\n';
      }
      std::cout << "argmin shared: "
                << (r.argmin_shared ? std::to_string(*r.argmin_shared) : std::string("none"))
                << ", argmin single: "
                << (r.argmin_single ? std::to_string(*r.argmin_single) : std::string("none"))
                << '\n';
    } else if (*plots) {
      const PlotScripts s = emit_plots(plot_dir);
      if (!s.message.empty()) std::cout << s.message << '\n';
      for (const auto& f : s.scripts) std::cout << "wrote " << f.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 0;
}
