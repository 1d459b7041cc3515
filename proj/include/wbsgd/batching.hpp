#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "wbsgd/matrix.hpp"

namespace wbsgd {

struct EstimatorConfig;

enum class Strategy { random, sequential };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

/// Disjoint cover of the row indices [0, n) by d = n / b batches of exactly b
/// rows each, fixed for the lifetime of a run.
class Partition {
 public:
  /// Validates the cover; throws std::invalid_argument on ragged, overlapping
  /// or incomplete batches.
  Partition(std::vector<std::vector<Index>> batches, Strategy strategy, std::uint64_t seed = 0);

  std::size_t n() const noexcept { return n_; }
  std::size_t batch_size() const noexcept { return b_; }
  std::size_t count() const noexcept { return batches_.size(); }
  Strategy strategy() const noexcept { return strategy_; }
  std::uint64_t seed() const noexcept { return seed_; }

  const std::vector<std::vector<Index>>& batches() const noexcept { return batches_; }
  std::span<const Index> batch(std::size_t i) const noexcept { return batches_[i]; }
  /// Batch i in ascending row order; the order gradient sums are reduced in.
  std::span<const Index> sorted_batch(std::size_t i) const noexcept { return sorted_[i]; }

 private:
  std::vector<std::vector<Index>> batches_;
  std::vector<std::vector<Index>> sorted_;
  std::size_t n_ = 0;
  std::size_t b_ = 0;
  Strategy strategy_;
  std::uint64_t seed_;
};

/// Seeded uniform permutation of [0, n) cut into consecutive blocks of b.
Partition partition_random(std::size_t n, std::size_t b, std::uint64_t seed);

/// Rows ordered by decreasing squared norm (ties: ascending index), cut into
/// consecutive blocks of b.
Partition partition_sequential(std::span<const double> row_norms_sq, std::size_t b);

/// sum_i ||A_tau_i||^2 with each term from the given estimator.
double partition_cost(const DenseMatrix& A, const Partition& P, const EstimatorConfig& est);

/// One batch per line, indices space-separated.
void write_partition(std::ostream& os, const Partition& P);
Partition read_partition(std::istream& is, Strategy strategy, std::uint64_t seed = 0);

}  // namespace wbsgd
