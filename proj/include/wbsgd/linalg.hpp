#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wbsgd/matrix.hpp"

namespace wbsgd {

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double frobenius_sq(const DenseMatrix& A);

/// y = A x
Vector matvec(const DenseMatrix& A, std::span<const double> x);
/// y = A^T r
Vector rmatvec(const DenseMatrix& A, std::span<const double> r);

/// Squared Euclidean norm of every row.
Vector row_norms_sq(const DenseMatrix& A);

enum class SpectralMethod { converged, power, max_norm };

/// Estimate of ||B^T B|| = ||B||^2 for a row subset B.
struct SpectralEstimate {
  double value = 0.0;
  SpectralMethod method = SpectralMethod::converged;
  std::size_t iterations_used = 0;
  std::uint64_t seed = 0;  // power method only
};

/// Gram matrix of the row subset in its smaller orientation: B B^T when the
/// subset has no more rows than columns, B^T B otherwise. Dense, row-major,
/// dimension returned through `dim`.
std::vector<double> small_gram(const RowView& B, std::size_t& dim);

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations, in
/// ascending order. Throws ConvergenceError after `max_sweeps` sweeps.
Vector symmetric_eigenvalues(std::vector<double> a, std::size_t n,
                             std::size_t* sweeps_used = nullptr, std::size_t max_sweeps = 100);

/// Largest eigenvalue of B^T B, converged to machine precision.
SpectralEstimate gram_spectral_norm_converged(const RowView& B);

/// Power-iteration count ceil(eps^-1 * ln(eps^-1 * b)).
std::size_t power_iteration_count(double pm_epsilon, std::size_t b);

/// Randomized power method on the Gram matrix of B: exactly
/// power_iteration_count(pm_epsilon, b) iterations from a seeded uniform
/// start on the unit sphere, returning the final Rayleigh quotient.
SpectralEstimate gram_spectral_norm_power(const RowView& B, double pm_epsilon, std::size_t b,
                                          std::uint64_t seed);

/// Householder QR of a tall matrix (rows >= cols).
class HouseholderQR {
 public:
  explicit HouseholderQR(const DenseMatrix& A);

  std::size_t rows() const noexcept { return n_; }
  std::size_t cols() const noexcept { return m_; }

  /// Q^T y
  Vector apply_qt(std::span<const double> y) const;
  /// Solves R x = z[0:cols) by back substitution.
  Vector solve_r(std::span<const double> z) const;
  /// Upper-triangular factor, column-major cols x cols.
  std::vector<double> r_colmajor() const;

 private:
  std::size_t n_;
  std::size_t m_;
  std::vector<double> work_;   // column-major n x m; reflectors below the diagonal
  std::vector<double> rdiag_;
  std::vector<double> beta_;
};

/// Singular values in descending order (QR, then one-sided Jacobi on R).
Vector singular_values(const DenseMatrix& A);

/// sigma_min(A); throws RankDeficientError when below 1e-10 * sigma_max.
double smallest_singular_value(const DenseMatrix& A);

/// argmin ||A x - b||_2 for full-column-rank A; throws RankDeficientError otherwise.
Vector least_squares_oracle(const DenseMatrix& A, std::span<const double> b);

}  // namespace wbsgd
