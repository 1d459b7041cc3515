#include "wbsgd/textio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace wbsgd {

namespace {

void read_header(std::istream& is, std::size_t& n, std::size_t& m) {
  if (!(is >> n >> m)) throw std::runtime_error("textio: missing 'n m' header");
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  return is;
}

}  // namespace

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix(std::ostream& os, const DenseMatrix& A) {
  os << A.rows() << ' ' << A.cols() << '\n';
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto r = A.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) os << (j ? " " : "") << format_real(r[j]);
    os << '\n';
  }
}

DenseMatrix read_matrix(std::istream& is) {
  std::size_t n = 0, m = 0;
  read_header(is, n, m);
  std::vector<double> d(n * m);
  for (auto& v : d)
    if (!(is >> v)) throw std::runtime_error("textio: truncated matrix body");
  return DenseMatrix(n, m, std::move(d));
}

void write_vector(std::ostream& os, std::span<const double> v) {
  os << v.size() << " 1\n";
  for (double e : v) os << format_real(e) << '\n';
}

Vector read_vector(std::istream& is) {
  std::size_t n = 0, m = 0;
  read_header(is, n, m);
  if (m != 1) throw std::runtime_error("textio: vector file must have one column");
  Vector v(n);
  for (auto& e : v)
    if (!(is >> e)) throw std::runtime_error("textio: truncated vector body");
  return v;
}

void write_labels(std::ostream& os, std::span<const int> labels) {
  os << labels.size() << " 1\n";
  for (int y : labels) os << y << '\n';
}

std::vector<int> read_labels(std::istream& is) {
  std::size_t n = 0, m = 0;
  read_header(is, n, m);
  std::vector<int> y(n);
  for (auto& e : y) {
    if (!(is >> e)) throw std::runtime_error("textio: truncated label file");
    if (e != 1 && e != -1) throw std::runtime_error("textio: labels must be +1 or -1");
  }
  return y;
}

void save_problem(const std::filesystem::path& dir, const Problem& problem) {
  std::filesystem::create_directories(dir);
  std::visit(
      [&](const auto& p) {
        auto a = open_out(dir / "A.txt");
        write_matrix(a, p.A);
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LeastSquaresProblem>) {
          auto b = open_out(dir / "b.txt");
          write_vector(b, p.rhs);
          if (p.x_star) {
            auto xs = open_out(dir / "x_star.txt");
            write_vector(xs, *p.x_star);
          }
        } else {
          auto y = open_out(dir / "y.txt");
          write_labels(y, p.labels);
          auto l = open_out(dir / "lambda.txt");
          l << format_real(p.lambda) << '\n';
        }
      },
      problem);
}

Problem load_problem(const std::filesystem::path& dir) {
  auto a = open_in(dir / "A.txt");
  DenseMatrix A = read_matrix(a);
  if (std::filesystem::exists(dir / "y.txt")) {
    auto y = open_in(dir / "y.txt");
    HingeLossProblem p{std::move(A), read_labels(y), 0.1};
    if (std::filesystem::exists(dir / "lambda.txt")) {
      auto l = open_in(dir / "lambda.txt");
      l >> p.lambda;
    }
    if (p.labels.size() != p.A.rows()) throw std::runtime_error("load_problem: label count mismatch");
    return p;
  }
  auto b = open_in(dir / "b.txt");
  LeastSquaresProblem p{std::move(A), read_vector(b), {}, {}, {}};
  if (p.rhs.size() != p.A.rows()) throw std::runtime_error("load_problem: rhs length mismatch");
  solve_reference(p);
  return p;
}

}  // namespace wbsgd
