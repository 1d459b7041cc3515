#pragma once

// Plain-text exchange format. A matrix file starts with a header line "n m"
// followed by n lines of m space-separated decimals. Vectors use the same
// layout with m = 1. Reals are written with 17 significant digits, so a
// write/read cycle is exact.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "wbsgd/matrix.hpp"
#include "wbsgd/problems.hpp"

namespace wbsgd {

/// %.17g
std::string format_real(double v);

void write_matrix(std::ostream& os, const DenseMatrix& A);
DenseMatrix read_matrix(std::istream& is);

void write_vector(std::ostream& os, std::span<const double> v);
Vector read_vector(std::istream& is);

void write_labels(std::ostream& os, std::span<const int> labels);
std::vector<int> read_labels(std::istream& is);

/// Writes A.txt plus b.txt / x_star.txt (least squares) or y.txt / lambda.txt (hinge).
void save_problem(const std::filesystem::path& dir, const Problem& p);
/// Reads back what save_problem wrote. x_star is recomputed from A and b.
Problem load_problem(const std::filesystem::path& dir);

}  // namespace wbsgd
