#include "wbsgd/batching.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "wbsgd/rng.hpp"
#include "wbsgd/weighting.hpp"

namespace wbsgd {

namespace {

void require_divisible(std::size_t n, std::size_t b) {
  if (b == 0) throw std::invalid_argument("partition: batch size must be >= 1");
  if (n == 0 || n % b != 0) {
    throw std::invalid_argument("partition: batch size " + std::to_string(b) +
                                " does not divide n = " + std::to_string(n) +
                                "; pad or truncate the system to a multiple of b");
  }
}

std::vector<std::vector<Index>> chop(const std::vector<Index>& order, std::size_t b) {
  std::vector<std::vector<Index>> batches(order.size() / b);
  for (std::size_t i = 0; i < batches.size(); ++i)
    batches[i].assign(order.begin() + static_cast<std::ptrdiff_t>(i * b),
                      order.begin() + static_cast<std::ptrdiff_t>((i + 1) * b));
  return batches;
}

}  // namespace

std::string_view to_string(Strategy s) { return s == Strategy::random ? "random" : "sequential"; }

Strategy parse_strategy(std::string_view s) {
  if (s == "random") return Strategy::random;
  if (s == "sequential") return Strategy::sequential;
  throw std::invalid_argument("unknown batching strategy '" + std::string(s) + "'");
}

Partition::Partition(std::vector<std::vector<Index>> batches, Strategy strategy, std::uint64_t seed)
    : batches_(std::move(batches)), strategy_(strategy), seed_(seed) {
  if (batches_.empty()) throw std::invalid_argument("Partition: no batches");
  b_ = batches_.front().size();
  if (b_ == 0) throw std::invalid_argument("Partition: empty batch");
  n_ = b_ * batches_.size();
  std::vector<char> seen(n_, 0);
  sorted_.reserve(batches_.size());
  for (const auto& batch : batches_) {
    if (batch.size() != b_) throw std::invalid_argument("Partition: batches differ in size");
    for (Index i : batch) {
      if (i >= n_) throw std::invalid_argument("Partition: index outside [0, n)");
      if (seen[i]) throw std::invalid_argument("Partition: index appears twice");
      seen[i] = 1;
    }
    auto s = batch;
    std::sort(s.begin(), s.end());
    sorted_.push_back(std::move(s));
  }
}

Partition partition_random(std::size_t n, std::size_t b, std::uint64_t seed) {
  require_divisible(n, b);
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return Partition(chop(order, b), Strategy::random, seed);
}

Partition partition_sequential(std::span<const double> row_norms_sq, std::size_t b) {
  require_divisible(row_norms_sq.size(), b);
  for (double v : row_norms_sq)
    if (!std::isfinite(v)) throw std::invalid_argument("partition_sequential: non-finite norm");
  std::vector<Index> order(row_norms_sq.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index c) {
    if (row_norms_sq[a] != row_norms_sq[c]) return row_norms_sq[a] > row_norms_sq[c];
    return a < c;
  });
  return Partition(chop(order, b), Strategy::sequential);
}

double partition_cost(const DenseMatrix& A, const Partition& P, const EstimatorConfig& est) {
  if (P.n() != A.rows()) throw std::invalid_argument("partition_cost: partition does not cover A");
  double total = 0.0;
  for (std::size_t i = 0; i < P.count(); ++i) total += batch_norm_sq(A, P, i, est).value;
  return total;
}

void write_partition(std::ostream& os, const Partition& P) {
  for (const auto& batch : P.batches()) {
    for (std::size_t k = 0; k < batch.size(); ++k) os << (k ? " " : "") << batch[k];
    os << '\n';
  }
}

Partition read_partition(std::istream& is, Strategy strategy, std::uint64_t seed) {
  std::vector<std::vector<Index>> batches;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<Index> batch;
    Index i = 0;
    while (ls >> i) batch.push_back(i);
    if (!batch.empty()) batches.push_back(std::move(batch));
  }
  return Partition(std::move(batches), strategy, seed);
}

}  // namespace wbsgd
