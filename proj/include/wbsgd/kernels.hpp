#pragma once

// Per-batch row kernels. The default versions split work across OpenMP
// threads once a batch is large enough; `serial::` holds the plain loops they
// are tested against. Both reduce over rows in the order given, so for the
// same inputs they produce bit-identical output for any thread count.

#include <span>

#include "wbsgd/matrix.hpp"

namespace wbsgd::kernels {

/// Batches with rows*cols below this run on the calling thread.
inline constexpr std::size_t kParallelWork = std::size_t{1} << 15;

/// out = sum_{j in rows} (<a_j, x> - rhs_j) a_j.  `residuals` receives the
/// per-row residuals and must have rows.size() entries.
void residual_sum(const DenseMatrix& A, std::span<const double> rhs, std::span<const Index> rows,
                  std::span<const double> x, std::span<double> residuals, std::span<double> out);

/// out = sum_{j in rows, y_j <x,a_j> < 1} y_j a_j.  `coeffs` has rows.size() entries.
void hinge_active_sum(const DenseMatrix& A, std::span<const int> labels,
                      std::span<const Index> rows, std::span<const double> x,
                      std::span<double> coeffs, std::span<double> out);

namespace serial {

void residual_sum(const DenseMatrix& A, std::span<const double> rhs, std::span<const Index> rows,
                  std::span<const double> x, std::span<double> residuals, std::span<double> out);

void hinge_active_sum(const DenseMatrix& A, std::span<const int> labels,
                      std::span<const Index> rows, std::span<const double> x,
                      std::span<double> coeffs, std::span<double> out);

}  // namespace serial

/// Threads OpenMP would use for a parallel region here (1 without OpenMP).
int max_threads();
/// Sets the worker count for subsequent parallel regions; no-op without OpenMP.
void set_threads(int n);

}  // namespace wbsgd::kernels
