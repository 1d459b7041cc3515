#pragma once

#include <span>

#include "wbsgd/batching.hpp"
#include "wbsgd/problems.hpp"
#include "wbsgd/rng.hpp"
#include "wbsgd/smooth.hpp"
#include "wbsgd/trace.hpp"
#include "wbsgd/weighting.hpp"

namespace wbsgd {

struct NonSmoothPlan {
  double alpha = 0.5;
  double m_alpha = 0.0;
  double c_abs = 1.0;
  std::size_t predicted_iterations = 1;
  double epsilon = 0.0;
  double mu = 0.0;  // lambda
};

/// 1 + ln(1 / min(alpha, 1 - alpha)); alpha must lie in (0, 1).
double m_alpha(double alpha);

/// predicted_iterations = ceil(C m_alpha mean(G)^2 / (lambda eps)).
NonSmoothPlan plan_nonsmooth(const LipschitzTable& G, double lambda, double epsilon,
                             double alpha = 0.5, double c_abs = 1.0);

/// lambda x - (1/b) sum_{j in tau, y_j <x,a_j> < 1} y_j a_j
Vector hinge_subgradient_batch(const HingeLossProblem& p, std::span<const Index> tau,
                               std::span<const double> x);

/// Running mean of the last ceil(alpha k) iterates after k steps. The mean is
/// (S_k - S_j) / (k - j) with S the prefix sum of iterates and j = k -
/// ceil(alpha k); S_j comes from a second copy of the solver that replays the
/// same sample sequence and trails behind, so no iterates are stored.
class SuffixAverage {
 public:
  SuffixAverage(double alpha, std::span<const double> x0);

  double alpha() const noexcept { return alpha_; }
  /// Number of trailing iterates to drop after k steps: k - ceil(alpha k).
  static std::size_t lag_index(double alpha, std::size_t k);

  /// Adds x_k, the iterate after step k = previous k + 1.
  void push(std::span<const double> x);
  /// Adds x_j for the trailing sum; j must advance one step at a time.
  void push_lagged(std::span<const double> x);

  std::size_t count() const noexcept { return k_; }
  std::size_t lagged_count() const noexcept { return j_; }
  /// Mean of x_{j+1..k}, or x0 before the first step.
  Vector mean() const;

 private:
  double alpha_;
  Vector x0_;
  Vector full_;
  Vector lagged_;
  std::size_t k_ = 0;
  std::size_t j_ = 0;
};

struct NonSmoothState {
  Vector x;
  std::size_t iteration = 0;
  std::size_t last_batch = 0;
  Vector coeffs;  // scratch, b entries
  Vector accum;   // scratch, m entries

  NonSmoothState(Vector x0, std::size_t b);
};

/// Applies x <- x - (1/(lambda k)) (1/(d p_i)) h_i(x) for batch i, with k the
/// 1-based index of this step.
void apply_nonsmooth_update(NonSmoothState& s, const HingeLossProblem& p, const Partition& P,
                            const WeightTable& W, std::size_t i);

/// Samples one batch from W and applies the update.
void step_nonsmooth(NonSmoothState& s, const HingeLossProblem& p, const Partition& P,
                    const WeightTable& W, Rng& rng);

/// Batched weighted subgradient descent with suffix averaging. Trace values
/// are F(average) - reference_objective. RunResult::x is the averaged iterate.
RunResult run_nonsmooth(const HingeLossProblem& p, const Partition& P, const LipschitzTable& G,
                        const SolveConfig& config, double reference_objective);

/// Builds the table named by config.estimator, the reference minimizer, and runs.
RunResult solve_nonsmooth(const HingeLossProblem& p, const Partition& P,
                          const SolveConfig& config);

}  // namespace wbsgd
