#include "wbsgd/problems.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "wbsgd/linalg.hpp"
#include "wbsgd/rng.hpp"

namespace wbsgd {

namespace {

constexpr std::array<std::pair<Family, std::string_view>, 7> kFamilyNames{{
    {Family::gaussian, "gaussian"},
    {Family::gaussian_var_k2, "gaussian_var_k2"},
    {Family::correlated_uniform_var_k2, "correlated_uniform_var_k2"},
    {Family::orthonormal, "orthonormal"},
    {Family::sparse_gaussian, "sparse_gaussian"},
    {Family::tomography, "tomography"},
    {Family::svm_gaussian, "svm_gaussian"},
}};

// Stream tags for the pieces of a synthetic problem.
enum : std::uint64_t { kMatrixStream = 1, kSolutionStream, kNoiseStream, kLabelStream };

Vector standard_normal(std::size_t len, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector v(len);
  for (auto& e : v) e = normal(rng);
  return v;
}

// Orthonormal DCT-II basis: row k, column j = c_k cos(pi (j + 1/2) k / n).
DenseMatrix dct_matrix(std::size_t n) {
  std::vector<double> d(n * n);
  const double c0 = std::sqrt(1.0 / static_cast<double>(n));
  const double ck = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const double angle = std::numbers::pi * (static_cast<double>(j) + 0.5) *
                           static_cast<double>(k) / static_cast<double>(n);
      d[k * n + j] = (k == 0 ? c0 : ck) * std::cos(angle);
    }
  }
  return DenseMatrix(n, n, std::move(d));
}

DenseMatrix random_matrix(const GeneratorSpec& spec) {
  Rng rng = make_rng(spec.seed, kMatrixStream);
  std::normal_distribution<double> normal;
  std::vector<double> d(spec.n * spec.m);
  switch (spec.family) {
    case Family::gaussian:
      for (auto& e : d) e = normal(rng);
      break;
    case Family::gaussian_var_k2:
      // Row k (1-based) has entries N(0, k^2).
      for (std::size_t i = 0; i < spec.n; ++i)
        for (std::size_t j = 0; j < spec.m; ++j)
          d[i * spec.m + j] = static_cast<double>(i + 1) * normal(rng);
      break;
    case Family::correlated_uniform_var_k2:
      // Row k (1-based) has entries U[0, sqrt(3) k].
      for (std::size_t i = 0; i < spec.n; ++i) {
        std::uniform_real_distribution<double> u(0.0, std::sqrt(3.0) * static_cast<double>(i + 1));
        for (std::size_t j = 0; j < spec.m; ++j) d[i * spec.m + j] = u(rng);
      }
      break;
    case Family::sparse_gaussian: {
      std::bernoulli_distribution keep(spec.density);
      for (auto& e : d) e = keep(rng) ? normal(rng) : 0.0;
      break;
    }
    default:
      throw std::logic_error("random_matrix: family has its own generator");
  }
  return DenseMatrix(spec.n, spec.m, std::move(d));
}

void validate(const GeneratorSpec& spec) {
  if (!(spec.noise_norm >= 0.0)) throw std::invalid_argument("generate: noise_norm must be >= 0");
  if (spec.family == Family::tomography) {
    if (spec.grid_n < 2) throw std::invalid_argument("generate: tomography grid_n must be >= 2");
    if (spec.oversample < 1) throw std::invalid_argument("generate: tomography oversample must be >= 1");
    return;
  }
  if (spec.n == 0 || spec.m == 0) throw std::invalid_argument("generate: n and m must be positive");
  if (spec.family == Family::svm_gaussian) {
    if (!(spec.lambda > 0.0)) throw std::invalid_argument("generate: lambda must be > 0");
    return;
  }
  if (spec.n < spec.m) throw std::invalid_argument("generate: least-squares families need n >= m");
  if (spec.family == Family::orthonormal && spec.n != spec.m)
    throw std::invalid_argument("generate: orthonormal family needs n == m");
  if (spec.family == Family::sparse_gaussian && !(spec.density > 0.0 && spec.density <= 1.0))
    throw std::invalid_argument("generate: density must lie in (0,1]");
}

HingeLossProblem generate_svm(const GeneratorSpec& spec) {
  Rng label_rng = make_rng(spec.seed, kLabelStream);
  Rng rng = make_rng(spec.seed, kMatrixStream);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal;
  const double shift = spec.svm_separation / std::sqrt(static_cast<double>(spec.m));
  std::vector<int> labels(spec.n);
  std::vector<double> d(spec.n * spec.m);
  for (std::size_t i = 0; i < spec.n; ++i) {
    labels[i] = coin(label_rng) ? 1 : -1;
    for (std::size_t j = 0; j < spec.m; ++j) d[i * spec.m + j] = labels[i] * shift + normal(rng);
  }
  return HingeLossProblem{DenseMatrix(spec.n, spec.m, std::move(d)), std::move(labels), spec.lambda};
}

}  // namespace

std::string_view to_string(Family f) {
  for (auto [fam, name] : kFamilyNames)
    if (fam == f) return name;
  return "unknown";
}

Family parse_family(std::string_view s) {
  for (auto [fam, name] : kFamilyNames)
    if (name == s) return fam;
  throw std::invalid_argument("unknown family '" + std::string(s) + "'");
}

bool is_least_squares(Family f) { return f != Family::svm_gaussian; }

void solve_reference(LeastSquaresProblem& p) {
  p.x_star = least_squares_oracle(p.A, p.rhs);
  auto r = matvec(p.A, *p.x_star);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= p.rhs[i];
  p.residual_norm = norm2(r);
}

void add_noise(LeastSquaresProblem& p, double noise_norm, std::uint64_t seed) {
  if (noise_norm > 0.0) {
    Rng rng = make_rng(seed, kNoiseStream);
    Vector e;
    double ne = 0.0;
    while (ne == 0.0) {
      e = standard_normal(p.rhs.size(), rng);
      ne = norm2(e);
    }
    for (std::size_t i = 0; i < e.size(); ++i) p.rhs[i] += e[i] * (noise_norm / ne);
  }
  solve_reference(p);
}

Problem generate(const GeneratorSpec& spec) {
  validate(spec);
  if (spec.family == Family::svm_gaussian) return generate_svm(spec);
  if (spec.family == Family::tomography) {
    auto p = generate_tomography(spec.grid_n, spec.oversample, spec.seed,
                                 spec.tomography_rows_from_n ? spec.n : 0);
    if (spec.noise_norm > 0.0) add_noise(p, spec.noise_norm, spec.seed);
    return p;
  }

  LeastSquaresProblem p;
  p.A = spec.family == Family::orthonormal ? dct_matrix(spec.n) : random_matrix(spec);
  Rng xrng = make_rng(spec.seed, kSolutionStream);
  p.x_true = standard_normal(spec.m, xrng);
  p.rhs = matvec(p.A, *p.x_true);
  add_noise(p, spec.noise_norm, spec.seed);
  return p;
}

double objective_ls(const LeastSquaresProblem& p, std::span<const double> x) {
  if (x.size() != p.A.cols()) throw std::invalid_argument("objective_ls: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.A.rows(); ++i) {
    const double r = dot(p.A.row(i), x) - p.rhs[i];
    s += r * r;
  }
  return 0.5 * s;
}

double error_ls(const LeastSquaresProblem& p, std::span<const double> x) {
  if (!p.x_star) throw std::logic_error("error_ls: problem has no reference solution");
  if (x.size() != p.x_star->size()) throw std::invalid_argument("error_ls: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - (*p.x_star)[i];
    s += d * d;
  }
  return std::sqrt(s);
}

Vector gradient_ls(const LeastSquaresProblem& p, std::span<const double> x) {
  auto r = matvec(p.A, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= p.rhs[i];
  return rmatvec(p.A, r);
}

double objective_hinge(const HingeLossProblem& p, std::span<const double> x) {
  if (x.size() != p.A.cols()) throw std::invalid_argument("objective_hinge: dimension mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.A.rows(); ++i)
    loss += std::max(0.0, 1.0 - p.labels[i] * dot(p.A.row(i), x));
  return loss / static_cast<double>(p.A.rows()) + 0.5 * p.lambda * dot(x, x);
}

Vector subgradient_hinge(const HingeLossProblem& p, std::span<const double> x) {
  const std::size_t n = p.A.rows();
  Vector g(x.begin(), x.end());
  for (auto& e : g) e *= p.lambda;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = p.labels[i];
    if (y * dot(p.A.row(i), x) < 1.0) {
      auto a = p.A.row(i);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] -= y * a[j] / static_cast<double>(n);
    }
  }
  return g;
}

DenseMatrix signed_rows(const HingeLossProblem& p) {
  std::vector<double> d(p.A.data().begin(), p.A.data().end());
  const std::size_t m = p.A.cols();
  for (std::size_t i = 0; i < p.A.rows(); ++i)
    if (p.labels[i] < 0)
      for (std::size_t j = 0; j < m; ++j) d[i * m + j] = -d[i * m + j];
  return DenseMatrix(p.A.rows(), m, std::move(d));
}

// Dual: max_{alpha in [0,1]^n} (1/n) sum alpha_i - lambda/2 ||x(alpha)||^2 with
// x(alpha) = (1/(lambda n)) sum alpha_i y_i a_i. Exact coordinate maximization,
// cyclic order.
HingeReference hinge_reference_minimizer(const HingeLossProblem& p, double gap_tolerance,
                                         std::size_t max_epochs) {
  const std::size_t n = p.A.rows();
  const std::size_t m = p.A.cols();
  const double ln = p.lambda * static_cast<double>(n);
  const auto norms = row_norms_sq(p.A);
  Vector alpha(n, 0.0);
  Vector x(m, 0.0);

  auto dual = [&] {
    double s = 0.0;
    for (double a : alpha) s += a;
    return s / static_cast<double>(n) - 0.5 * p.lambda * dot(x, x);
  };

  HingeReference ref;
  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) {
      const double y = p.labels[i];
      double next = 1.0;
      if (norms[i] > 0.0) {
        const double delta = ln * (1.0 - y * dot(p.A.row(i), x)) / norms[i];
        next = std::clamp(alpha[i] + delta, 0.0, 1.0);
      }
      const double change = next - alpha[i];
      if (change != 0.0) {
        auto a = p.A.row(i);
        for (std::size_t j = 0; j < m; ++j) x[j] += change * y * a[j] / ln;
        alpha[i] = next;
      }
    }
    const double primal = objective_hinge(p, x);
    const double gap = primal - dual();
    ref = HingeReference{x, primal, gap, epoch};
    if (gap <= gap_tolerance * std::max(1.0, std::abs(primal))) break;
  }
  return ref;
}

}  // namespace wbsgd
