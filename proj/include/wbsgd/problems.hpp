#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wbsgd/matrix.hpp"

namespace wbsgd {

/// min_x 1/2 ||A x - b||^2, i.e. F = (1/n) sum_i f_i with f_i = n/2 (b_i - <a_i,x>)^2.
struct LeastSquaresProblem {
  DenseMatrix A;
  Vector rhs;
  std::optional<Vector> x_star;
  std::optional<double> residual_norm;  // ||A x_star - rhs||
  std::optional<Vector> x_true;         // generating solution, when synthetic
};

/// min_x (1/n) sum_i [1 - y_i <x, a_i>]_+ + lambda/2 ||x||^2
struct HingeLossProblem {
  DenseMatrix A;
  std::vector<int> labels;  // each +1 or -1
  double lambda = 0.1;
};

using Problem = std::variant<LeastSquaresProblem, HingeLossProblem>;

enum class Family {
  gaussian,
  gaussian_var_k2,
  correlated_uniform_var_k2,
  orthonormal,
  sparse_gaussian,
  tomography,
  svm_gaussian,
};

std::string_view to_string(Family f);
Family parse_family(std::string_view s);
bool is_least_squares(Family f);

struct GeneratorSpec {
  Family family = Family::gaussian;
  std::size_t n = 1000;
  std::size_t m = 50;
  std::uint64_t seed = 0;
  double noise_norm = 0.0;     // 0 gives a consistent system
  double density = 0.2;        // sparse_gaussian
  std::size_t grid_n = 20;     // tomography
  std::size_t oversample = 3;  // tomography; n = oversample * grid_n^2 unless `n` overrides
  bool tomography_rows_from_n = false;
  double svm_separation = 2.0;  // svm_gaussian cloud centres at +-separation/sqrt(m) * 1
  double lambda = 0.1;          // svm_gaussian
};

/// Validates `spec` and builds the problem. Least-squares problems come with
/// x_star and residual_norm filled in.
Problem generate(const GeneratorSpec& spec);

/// Ray-traced tomography system: `lines` random lines through an N x N grid
/// of unit cells (lines = oversample * N^2 when zero). Consistent right-hand
/// side from a nonnegative phantom. Retries with the next seed, up to 10
/// attempts, if the system comes out rank deficient.
LeastSquaresProblem generate_tomography(std::size_t grid_n, std::size_t oversample,
                                        std::uint64_t seed, std::size_t lines = 0);

struct CellHit {
  std::size_t cell;  // iy * N + ix
  double length;
};

/// Cells crossed by the line origin + t * direction over the grid [0,N]^2,
/// in traversal order, with their intersection lengths. Empty if the line
/// misses the grid.
std::vector<CellHit> trace_line(std::size_t grid_n, double ox, double oy, double dx, double dy);

/// Adds `noise_norm` * (unit Gaussian direction) to rhs and recomputes x_star.
void add_noise(LeastSquaresProblem& p, double noise_norm, std::uint64_t seed);

/// Populates x_star and residual_norm through least_squares_oracle.
void solve_reference(LeastSquaresProblem& p);

/// 1/2 ||A x - b||^2
double objective_ls(const LeastSquaresProblem& p, std::span<const double> x);
/// ||x - x_star||; throws std::logic_error without a cached x_star.
double error_ls(const LeastSquaresProblem& p, std::span<const double> x);
/// A^T (A x - b)
Vector gradient_ls(const LeastSquaresProblem& p, std::span<const double> x);

double objective_hinge(const HingeLossProblem& p, std::span<const double> x);
/// lambda x - (1/n) sum_{y_i <x,a_i> < 1} y_i a_i
Vector subgradient_hinge(const HingeLossProblem& p, std::span<const double> x);

/// Rows y_i a_i.
DenseMatrix signed_rows(const HingeLossProblem& p);

struct HingeReference {
  Vector x;
  double objective;
  double duality_gap;
  std::size_t epochs;
};

/// Minimizer of the hinge objective by dual coordinate ascent, run until the
/// primal-dual gap certifies optimality to `gap_tolerance`.
HingeReference hinge_reference_minimizer(const HingeLossProblem& p, double gap_tolerance = 1e-12,
                                         std::size_t max_epochs = 200000);

}  // namespace wbsgd
