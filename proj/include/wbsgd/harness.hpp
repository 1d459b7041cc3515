#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wbsgd/batching.hpp"
#include "wbsgd/problems.hpp"
#include "wbsgd/smooth.hpp"
#include "wbsgd/weighting.hpp"

namespace wbsgd {

struct ExperimentSpec {
  GeneratorSpec generator;
  std::vector<std::size_t> batch_sizes{1};
  std::vector<Strategy> strategies{Strategy::random};
  std::vector<SamplingMode> modes{SamplingMode::weighted};
  std::vector<EstimatorKind> estimators{EstimatorKind::exact};
  /// Also run each non-exact estimator with exact norms in the step size.
  bool include_opt = false;
  /// Always add the b = 1 random uniform exact configuration as the speedup reference.
  bool include_baseline = true;
  std::size_t trials = 40;
  double target_error = 1e-5;  // l2 error (LS) or objective gap (hinge)
  /// Squared-error tolerance used in the step size; defaults to target_error^2 (LS).
  std::optional<double> epsilon;
  double pm_epsilon = 0.01;
  double residual_bound_factor = 1.1;
  std::size_t max_epochs = 50;
  std::size_t iteration_cap = 10'000'000;
  /// 0: one checkpoint per n/b iterations.
  std::size_t checkpoint_stride = 0;
  double geometric_ratio = 0.0;
  bool stop_at_target = true;
  double alpha = 0.5;
  double c_abs = 1.0;
  std::uint64_t seed = 0;
  /// Empty: nothing is written.
  std::filesystem::path out_dir;
};

/// One (batch size, strategy, mode, sampling estimator, step estimator) combination.
struct RunConfig {
  std::size_t batch_size = 1;
  Strategy strategy = Strategy::random;
  SamplingMode mode = SamplingMode::weighted;
  EstimatorKind sampling_estimator = EstimatorKind::exact;
  EstimatorKind step_estimator = EstimatorKind::exact;

  /// e.g. "b8_sequential_weighted_power-exact"
  std::string key() const;
};

/// Median over trials; runs that never reached the target count as +inf.
struct CensoredStats {
  std::size_t reached = 0;
  std::size_t trials = 0;
  double median = 0.0;  // +inf when fewer than half reached
  double mean = 0.0;    // over reached runs only; NaN when none did
};

CensoredStats censored_stats(const std::vector<std::optional<double>>& values);

struct TrialOutcome {
  std::vector<TraceRecord> trace;
  std::optional<std::size_t> iterations_to_target;
  std::optional<double> flops_shared_to_target;
  std::optional<double> flops_single_to_target;
  std::size_t predicted_iterations = 0;
  double precompute_flops = 0.0;
};

struct ConfigResult {
  RunConfig config;
  bool is_baseline_only = false;  // added only as the speedup reference
  std::vector<TrialOutcome> trials;
  CensoredStats iterations;
  CensoredStats flops_shared;
  CensoredStats flops_single;
  double predicted_iterations_median = 0.0;
  double speedup_vs_baseline = 0.0;  // baseline median iterations / this median
  double speedup_ratio = 0.0;        // ||A||_F^2 / sum ||A_tau||^2 (LS only)
};

struct ExperimentResult {
  std::vector<ConfigResult> configs;
  std::size_t n = 0;  // row count after padding
  std::size_t m = 0;
  TraceMetric metric = TraceMetric::l2_error;
};

/// Expands the spec into configurations, in the order written to the summary.
std::vector<RunConfig> expand_configs(const ExperimentSpec& spec);

/// Smallest n' >= n divisible by every batch size.
std::size_t padded_rows(std::size_t n, const std::vector<std::size_t>& batch_sizes);

/// Generates the problem (rows padded to a common multiple of the batch
/// sizes), runs every configuration for every trial, and writes
/// traces/<key>/trial_NNN.csv, weights/<key>.csv, summary.csv and spec.json
/// under out_dir when it is set.
ExperimentResult run_experiment(const ExperimentSpec& spec);

struct BatchStudyRow {
  std::size_t batch_size = 0;
  CensoredStats iterations;
  CensoredStats flops_shared;
  CensoredStats flops_single;
  double precompute_flops = 0.0;  // median over trials
};

struct BatchStudyResult {
  std::vector<BatchStudyRow> rows;
  std::optional<std::size_t> argmin_shared;  // batch size with least median shared flops
  std::optional<std::size_t> argmin_single;
};

/// Flops to reach the target against batch size, weighted sampling with the
/// power estimator, one checkpoint per iteration. Writes batch_study.csv when
/// out_dir is set.
BatchStudyResult optimal_batch_study(ExperimentSpec spec);

/// Writes the spec as JSON.
void write_spec_json(const std::filesystem::path& file, const ExperimentSpec& spec);

}  // namespace wbsgd
