#include "wbsgd/kernels.hpp"

#include <cstddef>

#include "wbsgd/linalg.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wbsgd::kernels {

namespace {

// Column-parallel accumulation: column c sums coeff_j * A[rows_j, c] over j in
// order, exactly as the serial row-outer loop does.
void weighted_row_sum(const DenseMatrix& A, std::span<const Index> rows,
                      std::span<const double> coeffs, std::span<double> out) {
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(A.cols());
  const std::size_t b = rows.size();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < m; ++c) {
    double acc = 0.0;
    for (std::size_t j = 0; j < b; ++j) acc += coeffs[j] * A(rows[j], static_cast<std::size_t>(c));
    out[static_cast<std::size_t>(c)] = acc;
  }
}

}  // namespace

void residual_sum(const DenseMatrix& A, std::span<const double> rhs, std::span<const Index> rows,
                  std::span<const double> x, std::span<double> residuals, std::span<double> out) {
  // Below the threshold skip the OpenMP runtime entirely; the serial loop
  // reduces in the same order.
  if (rows.size() * A.cols() < kParallelWork)
    return serial::residual_sum(A, rhs, rows, x, residuals, out);
  const std::ptrdiff_t b = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < b; ++j) {
    const Index r = rows[static_cast<std::size_t>(j)];
    residuals[static_cast<std::size_t>(j)] = dot(A.row(r), x) - rhs[r];
  }
  weighted_row_sum(A, rows, residuals, out);
}

void hinge_active_sum(const DenseMatrix& A, std::span<const int> labels,
                      std::span<const Index> rows, std::span<const double> x,
                      std::span<double> coeffs, std::span<double> out) {
  if (rows.size() * A.cols() < kParallelWork)
    return serial::hinge_active_sum(A, labels, rows, x, coeffs, out);
  const std::ptrdiff_t b = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < b; ++j) {
    const Index r = rows[static_cast<std::size_t>(j)];
    const double y = labels[r];
    coeffs[static_cast<std::size_t>(j)] = y * dot(A.row(r), x) < 1.0 ? y : 0.0;
  }
  weighted_row_sum(A, rows, coeffs, out);
}

namespace serial {

void residual_sum(const DenseMatrix& A, std::span<const double> rhs, std::span<const Index> rows,
                  std::span<const double> x, std::span<double> residuals, std::span<double> out) {
  const std::size_t m = A.cols();
  for (std::size_t c = 0; c < m; ++c) out[c] = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    auto a = A.row(rows[j]);
    double r = 0.0;
    for (std::size_t c = 0; c < m; ++c) r += a[c] * x[c];
    r -= rhs[rows[j]];
    residuals[j] = r;
    for (std::size_t c = 0; c < m; ++c) out[c] += r * a[c];
  }
}

void hinge_active_sum(const DenseMatrix& A, std::span<const int> labels,
                      std::span<const Index> rows, std::span<const double> x,
                      std::span<double> coeffs, std::span<double> out) {
  const std::size_t m = A.cols();
  for (std::size_t c = 0; c < m; ++c) out[c] = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    auto a = A.row(rows[j]);
    double margin = 0.0;
    for (std::size_t c = 0; c < m; ++c) margin += a[c] * x[c];
    const double y = labels[rows[j]];
    coeffs[j] = y * margin < 1.0 ? y : 0.0;
    for (std::size_t c = 0; c < m; ++c) out[c] += coeffs[j] * a[c];
  }
}

}  // namespace serial

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads([[maybe_unused]] int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

}  // namespace wbsgd::kernels
