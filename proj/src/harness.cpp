#include "wbsgd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "wbsgd/linalg.hpp"
#include "wbsgd/nonsmooth.hpp"
#include "wbsgd/textio.hpp"

namespace wbsgd {

namespace fs = std::filesystem;

namespace {

// Stream tags under the experiment seed.
constexpr std::uint64_t kTagPartition = 0x101;
constexpr std::uint64_t kTagEstimator = 0x102;
constexpr std::uint64_t kTagStepEstimator = 0x103;
constexpr std::uint64_t kTagSampling = 0x104;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot write " + file.string());
  return os;
}

std::string trial_name(std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%03zu.csv", t);
  return buf;
}

void validate(const ExperimentSpec& spec) {
  if (spec.batch_sizes.empty() || spec.strategies.empty() || spec.modes.empty() ||
      spec.estimators.empty())
    throw std::invalid_argument("experiment: batch sizes, strategies, modes and estimators must be nonempty");
  for (auto b : spec.batch_sizes)
    if (b == 0) throw std::invalid_argument("experiment: batch sizes must be >= 1");
  if (spec.trials == 0) throw std::invalid_argument("experiment: trials must be >= 1");
  if (!(spec.target_error > 0.0)) throw std::invalid_argument("experiment: target must be > 0");
  if (spec.max_epochs == 0) throw std::invalid_argument("experiment: max epochs must be >= 1");
}

Problem make_problem(const ExperimentSpec& spec, std::size_t& n_out) {
  GeneratorSpec gen = spec.generator;
  gen.seed = spec.seed;
  std::size_t n = gen.n;
  if (gen.family == Family::tomography && !gen.tomography_rows_from_n)
    n = gen.oversample * gen.grid_n * gen.grid_n;
  const std::size_t padded = padded_rows(n, spec.batch_sizes);
  if (padded != n) {
    if (gen.family == Family::orthonormal)
      throw std::invalid_argument("experiment: orthonormal size " + std::to_string(n) +
                                  " is not divisible by every batch size");
    if (gen.family == Family::tomography) gen.tomography_rows_from_n = true;
    gen.n = padded;
  } else if (gen.family == Family::tomography) {
    gen.n = n;
    gen.tomography_rows_from_n = true;
  }
  n_out = padded;
  return generate(gen);
}

struct Job {
  std::size_t config;
  std::size_t trial;
};

struct JobOutput {
  TrialOutcome outcome;
  std::optional<LipschitzTable> table;  // kept for trial 0
  std::optional<WeightTable> weights;
};

}  // namespace

std::string RunConfig::key() const {
  std::ostringstream os;
  os << 'b' << batch_size << '_' << to_string(strategy) << '_' << to_string(mode) << '_'
     << to_string(sampling_estimator) << '-' << to_string(step_estimator);
  return os.str();
}

CensoredStats censored_stats(const std::vector<std::optional<double>>& values) {
  CensoredStats s;
  s.trials = values.size();
  std::vector<double> all;
  double sum = 0.0;
  for (const auto& v : values) {
    all.push_back(v ? *v : kInf);
    if (v) {
      ++s.reached;
      sum += *v;
    }
  }
  s.mean = s.reached ? sum / static_cast<double>(s.reached)
                     : std::numeric_limits<double>::quiet_NaN();
  if (all.empty()) {
    s.median = kInf;
    return s;
  }
  std::sort(all.begin(), all.end());
  const std::size_t h = all.size() / 2;
  s.median = all.size() % 2 ? all[h] : 0.5 * (all[h - 1] + all[h]);
  return s;
}

std::size_t padded_rows(std::size_t n, const std::vector<std::size_t>& batch_sizes) {
  std::size_t l = 1;
  for (auto b : batch_sizes) l = std::lcm(l, b);
  return (n + l - 1) / l * l;
}

std::vector<RunConfig> expand_configs(const ExperimentSpec& spec) {
  std::vector<RunConfig> out;
  for (auto b : spec.batch_sizes)
    for (auto s : spec.strategies)
      for (auto mode : spec.modes)
        for (auto e : spec.estimators) {
          out.push_back({b, s, mode, e, e});
          if (spec.include_opt && e != EstimatorKind::exact)
            out.push_back({b, s, mode, e, EstimatorKind::exact});
        }
  return out;
}

void write_spec_json(const fs::path& file, const ExperimentSpec& spec) {
  using nlohmann::ordered_json;
  ordered_json j;
  const auto& g = spec.generator;
  j["generator"] = {{"family", to_string(g.family)},
                    {"n", g.n},
                    {"m", g.m},
                    {"noise_norm", g.noise_norm},
                    {"density", g.density},
                    {"grid_n", g.grid_n},
                    {"oversample", g.oversample},
                    {"svm_separation", g.svm_separation},
                    {"lambda", g.lambda}};
  j["batch_sizes"] = spec.batch_sizes;
  auto names = [](const auto& v) {
    std::vector<std::string> out;
    for (auto x : v) out.emplace_back(to_string(x));
    return out;
  };
  j["strategies"] = names(spec.strategies);
  j["modes"] = names(spec.modes);
  j["estimators"] = names(spec.estimators);
  j["include_opt"] = spec.include_opt;
  j["include_baseline"] = spec.include_baseline;
  j["trials"] = spec.trials;
  j["target_error"] = spec.target_error;
  if (spec.epsilon) j["epsilon"] = *spec.epsilon;
  j["pm_epsilon"] = spec.pm_epsilon;
  j["residual_bound_factor"] = spec.residual_bound_factor;
  j["max_epochs"] = spec.max_epochs;
  j["iteration_cap"] = spec.iteration_cap;
  j["checkpoint_stride"] = spec.checkpoint_stride;
  j["geometric_ratio"] = spec.geometric_ratio;
  j["stop_at_target"] = spec.stop_at_target;
  j["alpha"] = spec.alpha;
  j["c_abs"] = spec.c_abs;
  j["seed"] = spec.seed;
  auto os = open_out(file);
  os << j.dump(2) << '\n';
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  const bool write = !spec.out_dir.empty();
  if (write) {
    fs::create_directories(spec.out_dir);
    write_spec_json(spec.out_dir / "spec.json", spec);
  }

  ExperimentResult result;
  std::size_t n = 0;
  const Problem problem = make_problem(spec, n);
  const bool ls = std::holds_alternative<LeastSquaresProblem>(problem);
  const LeastSquaresProblem* lsp = ls ? &std::get<LeastSquaresProblem>(problem) : nullptr;
  const HingeLossProblem* hp = ls ? nullptr : &std::get<HingeLossProblem>(problem);
  const DenseMatrix signed_A = ls ? DenseMatrix{} : signed_rows(*hp);
  const DenseMatrix& A = ls ? lsp->A : signed_A;
  result.n = n;
  result.m = A.cols();
  result.metric = ls ? TraceMetric::l2_error : TraceMetric::objective_gap;

  std::vector<RunConfig> configs = expand_configs(spec);
  std::vector<bool> baseline_only(configs.size(), false);
  const RunConfig baseline{1, Strategy::random, SamplingMode::uniform, EstimatorKind::exact,
                           EstimatorKind::exact};
  std::optional<std::size_t> baseline_index;
  for (std::size_t c = 0; c < configs.size(); ++c)
    if (configs[c].key() == baseline.key()) baseline_index = c;
  if (spec.include_baseline && !baseline_index) {
    baseline_index = configs.size();
    configs.push_back(baseline);
    baseline_only.push_back(true);
  }

  const std::optional<double> sigma_min =
      ls ? std::optional<double>(smallest_singular_value(lsp->A)) : std::nullopt;
  const double reference = ls ? 0.0 : hinge_reference_minimizer(*hp).objective;
  const Vector norms = row_norms_sq(A);
  std::map<std::size_t, Partition> sequential;
  for (const auto& c : configs)
    if (c.strategy == Strategy::sequential && !sequential.count(c.batch_size))
      sequential.emplace(c.batch_size, partition_sequential(norms, c.batch_size));

  if (write)
    for (std::size_t c = 0; c < configs.size(); ++c) {
      fs::create_directories(spec.out_dir / "traces" / configs[c].key());
      fs::create_directories(spec.out_dir / "weights");
    }

  std::vector<Job> jobs;
  for (std::size_t c = 0; c < configs.size(); ++c)
    for (std::size_t t = 0; t < spec.trials; ++t) jobs.push_back({c, t});
  std::vector<JobOutput> outputs(jobs.size());

  const double epsilon = spec.epsilon ? *spec.epsilon
                                      : (ls ? spec.target_error * spec.target_error
                                            : spec.target_error);
  std::exception_ptr failure;
  const std::ptrdiff_t njobs = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ji = 0; ji < njobs; ++ji) {
    try {
      const Job job = jobs[static_cast<std::size_t>(ji)];
      const RunConfig& rc = configs[job.config];
      const std::size_t b = rc.batch_size;
      const Partition P =
          rc.strategy == Strategy::sequential
              ? sequential.at(b)
              : partition_random(n, b, substream_seed(spec.seed, kTagPartition, b, job.trial));
      const std::uint64_t est_seed = substream_seed(spec.seed, kTagEstimator, b, job.trial,
                                                    static_cast<std::uint64_t>(rc.strategy));
      auto table = [&](EstimatorKind kind, std::uint64_t seed) {
        const EstimatorConfig est{kind, spec.pm_epsilon, seed};
        return ls ? lipschitz_ls(A, P, est) : lipschitz_hinge(A, P, hp->lambda, est);
      };
      const LipschitzTable L = table(rc.sampling_estimator, est_seed);
      std::optional<LipschitzTable> T;
      if (rc.step_estimator != rc.sampling_estimator)
        T = table(rc.step_estimator,
                  substream_seed(spec.seed, kTagStepEstimator, b, job.trial,
                                 static_cast<std::uint64_t>(rc.strategy)));

      SolveConfig cfg;
      cfg.epsilon = epsilon;
      cfg.mode = rc.mode;
      cfg.estimator = rc.sampling_estimator;
      cfg.step_estimator = rc.step_estimator;
      cfg.pm_epsilon = spec.pm_epsilon;
      cfg.residual_bound_factor = spec.residual_bound_factor;
      cfg.seed = substream_seed(spec.seed, kTagSampling, fnv1a(rc.key()), job.trial);
      cfg.max_iterations = spec.max_epochs * P.count();
      cfg.iteration_cap = spec.iteration_cap;
      cfg.checkpoint_stride = spec.checkpoint_stride;
      cfg.geometric_ratio = spec.geometric_ratio;
      cfg.stop_at_target = spec.stop_at_target;
      cfg.target = spec.target_error;
      cfg.alpha = spec.alpha;
      cfg.c_abs = spec.c_abs;

      RunResult run = ls ? run_smooth(*lsp, P, L, cfg, T ? &*T : nullptr, sigma_min)
                         : run_nonsmooth(*hp, P, L, cfg, reference);

      JobOutput& out = outputs[static_cast<std::size_t>(ji)];
      TrialOutcome& o = out.outcome;
      o.iterations_to_target = run.iterations_to_target;
      o.predicted_iterations = run.predicted_iterations;
      o.precompute_flops = L.precompute_flops;
      for (const auto& r : run.trace)
        if (r.value <= spec.target_error) {
          o.flops_shared_to_target = r.flops_shared;
          o.flops_single_to_target = r.flops_single;
          break;
        }
      if (write) {
        auto os = open_out(spec.out_dir / "traces" / rc.key() / trial_name(job.trial));
        write_trace_header(os, result.metric);
        write_trace_rows(os, job.trial, run.trace);
      }
      o.trace = std::move(run.trace);
      if (job.trial == 0) {
        out.weights = rc.mode == SamplingMode::uniform
                          ? weights_uniform(P.count())
                          : (ls ? weights_smooth(L) : weights_nonsmooth(L));
        out.table = L;
      }
    } catch (...) {
#pragma omp critical(wbsgd_experiment_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t c = 0; c < configs.size(); ++c) {
    ConfigResult cr;
    cr.config = configs[c];
    cr.is_baseline_only = baseline_only[c];
    std::vector<std::optional<double>> its, fsh, fsi;
    std::vector<double> predicted;
    for (std::size_t t = 0; t < spec.trials; ++t) {
      JobOutput& out = outputs[c * spec.trials + t];
      const auto& o = out.outcome;
      its.push_back(o.iterations_to_target ? std::optional<double>(
                                                 static_cast<double>(*o.iterations_to_target))
                                           : std::nullopt);
      fsh.push_back(o.flops_shared_to_target);
      fsi.push_back(o.flops_single_to_target);
      predicted.push_back(static_cast<double>(o.predicted_iterations));
      if (t == 0 && write) {
        auto os = open_out(spec.out_dir / "weights" / (configs[c].key() + ".csv"));
        write_weights_csv(os, *out.table, *out.weights);
      }
      cr.trials.push_back(std::move(out.outcome));
    }
    cr.iterations = censored_stats(its);
    cr.flops_shared = censored_stats(fsh);
    cr.flops_single = censored_stats(fsi);
    std::vector<std::optional<double>> pred(predicted.begin(), predicted.end());
    cr.predicted_iterations_median = censored_stats(pred).median;
    if (ls) {
      const Partition P = configs[c].strategy == Strategy::sequential
                              ? sequential.at(configs[c].batch_size)
                              : partition_random(n, configs[c].batch_size,
                                                 substream_seed(spec.seed, kTagPartition,
                                                                configs[c].batch_size, 0));
      LipschitzTable exact;
      cr.speedup_ratio = speedup_ratio(*lsp, P, exact);
    }
    result.configs.push_back(std::move(cr));
  }

  const double base_median =
      baseline_index ? result.configs[*baseline_index].iterations.median : kInf;
  for (auto& cr : result.configs) {
    const double med = cr.iterations.median;
    cr.speedup_vs_baseline = std::isfinite(base_median) && std::isfinite(med) && med > 0.0
                                 ? base_median / med
                                 : std::numeric_limits<double>::quiet_NaN();
  }

  if (write) {
    auto os = open_out(spec.out_dir / "summary.csv");
    os << "config,batch_size,strategy,mode,sampling_estimator,step_estimator,trials,reached,"
          "iterations_median,iterations_mean,flops_shared_median,flops_single_median,"
          "predicted_iterations_median,speedup_vs_baseline,speedup_ratio\n";
    for (const auto& cr : result.configs) {
      const auto& c = cr.config;
      os << c.key() << ',' << c.batch_size << ',' << to_string(c.strategy) << ','
         << to_string(c.mode) << ',' << to_string(c.sampling_estimator) << ','
         << to_string(c.step_estimator) << ',' << cr.iterations.trials << ','
         << cr.iterations.reached << ',' << format_real(cr.iterations.median) << ','
         << format_real(cr.iterations.mean) << ',' << format_real(cr.flops_shared.median) << ','
         << format_real(cr.flops_single.median) << ','
         << format_real(cr.predicted_iterations_median) << ','
         << format_real(cr.speedup_vs_baseline) << ',' << format_real(cr.speedup_ratio) << '\n';
    }
  }
  return result;
}

BatchStudyResult optimal_batch_study(ExperimentSpec spec) {
  spec.estimators = {EstimatorKind::power};
  spec.modes = {SamplingMode::weighted};
  spec.strategies.resize(1);
  spec.include_opt = false;
  spec.include_baseline = false;
  spec.stop_at_target = true;
  spec.checkpoint_stride = 1;
  spec.geometric_ratio = 0.0;
  const fs::path out_dir = spec.out_dir;
  spec.out_dir.clear();
  if (!out_dir.empty()) fs::create_directories(out_dir);
  if (!out_dir.empty()) write_spec_json(out_dir / "spec.json", spec);

  const ExperimentResult r = run_experiment(spec);
  BatchStudyResult out;
  double best_shared = kInf;
  double best_single = kInf;
  for (const auto& cr : r.configs) {
    BatchStudyRow row;
    row.batch_size = cr.config.batch_size;
    row.iterations = cr.iterations;
    row.flops_shared = cr.flops_shared;
    row.flops_single = cr.flops_single;
    std::vector<std::optional<double>> pre;
    for (const auto& t : cr.trials) pre.push_back(t.precompute_flops);
    row.precompute_flops = censored_stats(pre).median;
    if (row.flops_shared.median < best_shared) {
      best_shared = row.flops_shared.median;
      out.argmin_shared = row.batch_size;
    }
    if (row.flops_single.median < best_single) {
      best_single = row.flops_single.median;
      out.argmin_single = row.batch_size;
    }
    out.rows.push_back(row);
  }
  if (!out_dir.empty()) {
    auto os = open_out(out_dir / "batch_study.csv");
    os << "batch_size,trials,reached,iterations_median,flops_shared_median,flops_single_median,"
          "precompute_flops_median\n";
    for (const auto& row : out.rows)
      os << row.batch_size << ',' << row.iterations.trials << ',' << row.iterations.reached << ','
         << format_real(row.iterations.median) << ',' << format_real(row.flops_shared.median)
         << ',' << format_real(row.flops_single.median) << ','
         << format_real(row.precompute_flops) << '\n';
  }
  return out;
}

}  // namespace wbsgd
