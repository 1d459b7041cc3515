#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "wbsgd/batching.hpp"
#include "wbsgd/problems.hpp"
#include "wbsgd/rng.hpp"
#include "wbsgd/trace.hpp"
#include "wbsgd/weighting.hpp"

namespace wbsgd {

enum class SamplingMode { weighted, uniform };

std::string_view to_string(SamplingMode m);
SamplingMode parse_sampling_mode(std::string_view s);

/// Run parameters shared by the smooth and non-smooth solvers.
struct SolveConfig {
  double epsilon = 1e-10;                 // target: squared error (LS) or objective gap (hinge)
  std::optional<double> epsilon0;         // defaults to ||x0 - x*||^2
  SamplingMode mode = SamplingMode::weighted;
  EstimatorKind estimator = EstimatorKind::exact;
  /// Estimator for the step size when it differs from the sampling estimator.
  std::optional<EstimatorKind> step_estimator;
  double pm_epsilon = 0.01;
  double residual_bound_factor = 1.1;
  /// ||A x* - b|| to assume when x* is not available.
  std::optional<double> residual_bound;
  std::uint64_t seed = 0;
  /// 0 selects 50 epochs (50 n / b iterations).
  std::size_t max_iterations = 0;
  /// Ceiling applied to predicted_iterations when extending the budget.
  std::size_t iteration_cap = 10'000'000;
  /// 0 selects n / b.
  std::size_t checkpoint_stride = 0;
  double geometric_ratio = 0.0;
  /// Stop at the first checkpoint meeting the target.
  bool stop_at_target = true;
  /// Overrides the default stopping threshold (sqrt(epsilon) for LS, epsilon for hinge).
  std::optional<double> target;
  // Non-smooth only.
  double alpha = 0.5;
  double c_abs = 1.0;
};

struct SmoothStepPlan {
  double gamma = 0.0;
  std::size_t predicted_iterations = 1;
  double epsilon = 0.0;
  double epsilon0 = 0.0;
  double sigma_tau_sq_bound = 0.0;  // d sum_i ||A_tau_i||^2 (factor ||r_tau_i||)^2
  double mu = 0.0;                  // sigma_min(A)^2
};

/// Per-batch squared residual norms ||A_tau_i x* - b_tau_i||^2. Without x*,
/// the residual bound R is spread evenly: R^2 b / n per batch.
Vector batch_residuals_sq(const LeastSquaresProblem& p, const Partition& P,
                          std::optional<double> residual_bound = std::nullopt);

/// Step size and iteration count for weighted sampling. `sigma_min` is
/// computed from A when not supplied.
SmoothStepPlan plan_smooth(const LeastSquaresProblem& p, const Partition& P,
                           const LipschitzTable& L, double epsilon, double epsilon0,
                           double residual_bound_factor,
                           std::optional<double> sigma_min = std::nullopt,
                           std::optional<double> residual_bound = std::nullopt);

/// Same for uniform sampling, with worst-batch quantities in place of sums:
/// gamma = (eps/4) / (eps d max ||A_tau||^2 + sigma_min^-2 d^2 max ||A_tau||^2 ||r_tau||^2).
SmoothStepPlan plan_smooth_uniform(const LeastSquaresProblem& p, const Partition& P,
                                   const LipschitzTable& L, double epsilon, double epsilon0,
                                   double residual_bound_factor,
                                   std::optional<double> sigma_min = std::nullopt,
                                   std::optional<double> residual_bound = std::nullopt);

/// grad g_tau_i(x) = d sum_{j in tau_i} (<a_j, x> - b_j) a_j
Vector batch_gradient_ls(const LeastSquaresProblem& p, const Partition& P, std::size_t i,
                         std::span<const double> x);

struct SmoothState {
  Vector x;
  std::size_t iteration = 0;
  std::size_t last_batch = 0;
  Vector residuals;  // scratch, b entries
  Vector accum;      // scratch, m entries

  SmoothState(Vector x0, std::size_t b);
};

/// Applies x <- x - (gamma / p_i) sum_{j in tau_i} (<a_j,x> - b_j) a_j for batch i.
void apply_smooth_update(SmoothState& s, const LeastSquaresProblem& p, const Partition& P,
                         const WeightTable& W, double gamma, std::size_t i);

/// Samples one batch from W and applies the update.
void step_smooth(SmoothState& s, const LeastSquaresProblem& p, const Partition& P,
                 const WeightTable& W, double gamma, Rng& rng);

struct RunResult {
  Vector x;
  std::vector<TraceRecord> trace;
  std::size_t iterations = 0;
  std::size_t budget = 0;
  std::size_t predicted_iterations = 0;
  std::optional<std::size_t> iterations_to_target;
  double target = 0.0;
  double step = 0.0;  // gamma (smooth) or 1/lambda (non-smooth)
};

/// Batched SGD on a least-squares problem with x* cached. `L` drives the
/// sampling weights; `step_table` (default: L) drives the step size.
RunResult run_smooth(const LeastSquaresProblem& p, const Partition& P, const LipschitzTable& L,
                     const SolveConfig& config, const LipschitzTable* step_table = nullptr,
                     std::optional<double> sigma_min = std::nullopt);

/// Builds the tables named by config.estimator / config.step_estimator and runs.
RunResult solve_smooth(const LeastSquaresProblem& p, const Partition& P, const SolveConfig& config);

/// Predicted iteration ratio k_stand / k_batch for consistent systems or
/// uniformly spread residuals: ||A||_F^2 / sum_i ||A_tau_i||^2, always in [1, b].
/// Spectral norms are recomputed exactly unless L already holds exact values.
double speedup_ratio(const LeastSquaresProblem& p, const Partition& P, const LipschitzTable& L);

/// The same ratio with the actual per-row and per-batch residuals at x*.
double speedup_ratio_general(const LeastSquaresProblem& p, const Partition& P,
                             const LipschitzTable& L, double epsilon,
                             std::optional<double> sigma_min = std::nullopt);

}  // namespace wbsgd
