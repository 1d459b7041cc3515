#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

#include "wbsgd/batching.hpp"
#include "wbsgd/linalg.hpp"
#include "wbsgd/matrix.hpp"
#include "wbsgd/rng.hpp"

namespace wbsgd {

enum class EstimatorKind { exact, max_norm, power };

std::string_view to_string(EstimatorKind k);
EstimatorKind parse_estimator(std::string_view s);

/// How ||A_tau||^2 is obtained for each batch.
///   exact    converged largest eigenvalue of the batch Gram matrix
///   max_norm max_{k in tau} ||a_k||^2 (upper bound up to the batch's coherence)
///   power    randomized power method, pm_epsilon accuracy; batch i is seeded
///            with substream_seed(seed, i)
struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::exact;
  double pm_epsilon = 0.01;
  std::uint64_t seed = 0;
};

/// ||A_tau_i||^2 under the given estimator.
SpectralEstimate batch_norm_sq(const DenseMatrix& A, const Partition& P, std::size_t i,
                               const EstimatorConfig& est);

/// Per-batch Lipschitz constants: L_tau (gradient, smooth case) or G_tau
/// (function value, non-smooth case).
struct LipschitzTable {
  Vector values;
  Vector batch_norms_sq;  // the ||A_tau_i||^2 estimates the values derive from
  EstimatorConfig estimator;
  double mean = 0.0;
  std::size_t n = 0;
  std::size_t batch_size = 0;
  double lambda = 0.0;  // hinge tables only
  /// Multiply-adds spent computing batch_norms_sq.
  double precompute_flops = 0.0;

  std::size_t count() const noexcept { return values.size(); }
  /// sum_i ||A_tau_i||^2
  double norm_sq_sum() const;
};

/// L_tau_i = (n/b) ||A_tau_i||^2.
LipschitzTable lipschitz_ls(const DenseMatrix& A, const Partition& P, const EstimatorConfig& est);

/// G_tau_i = ||A_tau_i|| / sqrt(b) + lambda, for A_signed with rows y_k a_k.
LipschitzTable lipschitz_hinge(const DenseMatrix& A_signed, const Partition& P, double lambda,
                               const EstimatorConfig& est);

enum class WeightMode { uniform, smooth_weighted, nonsmooth_weighted };

struct WeightTable {
  Vector probabilities;
  Vector cumulative;  // prefix sums; back() == 1 exactly
  WeightMode mode = WeightMode::uniform;
  bool uniform_fallback = false;  // weighting requested but total mass was zero

  std::size_t count() const noexcept { return probabilities.size(); }
};

WeightTable weights_uniform(std::size_t d);

/// p_i = 1/(2d) + L_i / (2 d mean(L)).
WeightTable weights_smooth(const LipschitzTable& L);

/// p_i = G_i / sum_j G_j.
WeightTable weights_nonsmooth(const LipschitzTable& G);

/// Draws a batch index with probability probabilities[i].
std::size_t sample(const WeightTable& W, Rng& rng);

/// CSV with header batch_index,value,probability.
void write_weights_csv(std::ostream& os, const LipschitzTable& L, const WeightTable& W);

}  // namespace wbsgd
