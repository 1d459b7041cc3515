#include "wbsgd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "wbsgd/errors.hpp"
#include "wbsgd/rng.hpp"

namespace wbsgd {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("DenseMatrix: data length " + std::to_string(data_.size()) +
                                " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("DenseMatrix: non-finite entry");
  }
}

DenseMatrix DenseMatrix::zeros(std::size_t rows, std::size_t cols) {
  return DenseMatrix(rows, cols, std::vector<double>(rows * cols, 0.0));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
  return DenseMatrix(n, n, std::move(d));
}

RowView::RowView(const DenseMatrix& parent, std::span<const Index> indices)
    : parent_(&parent), indices_(indices) {
  std::unordered_set<Index> seen;
  seen.reserve(indices.size());
  for (Index i : indices) {
    if (i >= parent.rows()) throw std::out_of_range("RowView: row index out of range");
    if (!seen.insert(i).second) throw std::invalid_argument("RowView: duplicate row index");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double frobenius_sq(const DenseMatrix& A) { return dot(A.data(), A.data()); }

Vector matvec(const DenseMatrix& A, std::span<const double> x) {
  Vector y(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) y[i] = dot(A.row(i), x);
  return y;
}

Vector rmatvec(const DenseMatrix& A, std::span<const double> r) {
  Vector y(A.cols(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto a = A.row(i);
    for (std::size_t j = 0; j < A.cols(); ++j) y[j] += r[i] * a[j];
  }
  return y;
}

Vector row_norms_sq(const DenseMatrix& A) {
  Vector out(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) out[i] = dot(A.row(i), A.row(i));
  return out;
}

std::vector<double> small_gram(const RowView& B, std::size_t& dim) {
  const std::size_t b = B.size();
  const std::size_t m = B.cols();
  if (b <= m) {
    dim = b;
    std::vector<double> g(b * b);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = i; j < b; ++j) {
        g[i * b + j] = g[j * b + i] = dot(B.row(i), B.row(j));
      }
    }
    return g;
  }
  dim = m;
  std::vector<double> g(m * m, 0.0);
  for (std::size_t k = 0; k < b; ++k) {
    auto a = B.row(k);
    for (std::size_t i = 0; i < m; ++i) {
      if (a[i] == 0.0) continue;
      for (std::size_t j = i; j < m; ++j) g[i * m + j] += a[i] * a[j];
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < i; ++j) g[i * m + j] = g[j * m + i];
  return g;
}

// Cyclic Jacobi with the classical underflow test: an off-diagonal entry is
// zeroed outright once it no longer perturbs either diagonal entry.
Vector symmetric_eigenvalues(std::vector<double> a, std::size_t n, std::size_t* sweeps_used,
                             std::size_t max_sweeps) {
  if (a.size() != n * n) throw std::invalid_argument("symmetric_eigenvalues: size mismatch");
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  std::size_t sweep = 0;
  for (;; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::abs(at(p, q));
    if (off == 0.0) break;
    if (sweep >= max_sweeps) {
      throw ConvergenceError("symmetric_eigenvalues: no convergence after " +
                             std::to_string(max_sweeps) + " sweeps");
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(at(p, p)) + g == std::abs(at(p, p)) &&
            std::abs(at(q, q)) + g == std::abs(at(q, q))) {
          at(p, q) = at(q, p) = 0.0;
          continue;
        }
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        at(p, q) = at(q, p) = 0.0;
      }
    }
  }
  if (sweeps_used) *sweeps_used = sweep;
  Vector ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = at(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

SpectralEstimate gram_spectral_norm_converged(const RowView& B) {
  if (B.size() == 0) throw std::invalid_argument("gram_spectral_norm_converged: empty row view");
  std::size_t dim = 0;
  auto g = small_gram(B, dim);
  std::size_t sweeps = 0;
  auto ev = symmetric_eigenvalues(std::move(g), dim, &sweeps);
  SpectralEstimate est;
  est.value = std::max(0.0, ev.back());
  est.method = SpectralMethod::converged;
  est.iterations_used = sweeps;
  return est;
}

std::size_t power_iteration_count(double pm_epsilon, std::size_t b) {
  if (!(pm_epsilon > 0.0 && pm_epsilon < 1.0))
    throw std::invalid_argument("power_iteration_count: pm_epsilon must lie in (0,1)");
  if (b == 0) throw std::invalid_argument("power_iteration_count: b must be >= 1");
  const double inv = 1.0 / pm_epsilon;
  return static_cast<std::size_t>(std::ceil(inv * std::log(inv * static_cast<double>(b))));
}

SpectralEstimate gram_spectral_norm_power(const RowView& B, double pm_epsilon, std::size_t b,
                                          std::uint64_t seed) {
  const std::size_t iters = power_iteration_count(pm_epsilon, b);
  SpectralEstimate est;
  est.method = SpectralMethod::power;
  est.seed = seed;
  if (B.size() == 0) throw std::invalid_argument("gram_spectral_norm_power: empty row view");

  std::size_t dim = 0;
  const auto g = small_gram(B, dim);
  if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) return est;

  Rng rng(seed);
  std::normal_distribution<double> normal;
  Vector v(dim), w(dim);
  double nv = 0.0;
  while (nv == 0.0) {
    for (auto& e : v) e = normal(rng);
    nv = norm2(v);
  }
  for (auto& e : v) e /= nv;

  auto apply = [&](const Vector& in, Vector& out) {
    for (std::size_t i = 0; i < dim; ++i)
      out[i] = dot(std::span<const double>(g.data() + i * dim, dim), in);
  };
  for (std::size_t t = 0; t < iters; ++t) {
    apply(v, w);
    const double nw = norm2(w);
    est.iterations_used = t + 1;
    if (nw == 0.0) return est;  // start vector in the null space
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / nw;
  }
  apply(v, w);
  est.value = std::max(0.0, dot(v, w));
  return est;
}

HouseholderQR::HouseholderQR(const DenseMatrix& A)
    : n_(A.rows()), m_(A.cols()), work_(A.rows() * A.cols()), rdiag_(A.cols()), beta_(A.cols()) {
  if (n_ < m_) throw RankDeficientError("HouseholderQR: fewer rows than columns");
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < m_; ++j) work_[j * n_ + i] = A(i, j);

  for (std::size_t k = 0; k < m_; ++k) {
    double* col = work_.data() + k * n_;
    double norm = 0.0;
    for (std::size_t i = k; i < n_; ++i) norm += col[i] * col[i];
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      rdiag_[k] = 0.0;
      beta_[k] = 0.0;
      continue;
    }
    const double alpha = col[k] > 0.0 ? -norm : norm;
    col[k] -= alpha;
    double vnorm_sq = 0.0;
    for (std::size_t i = k; i < n_; ++i) vnorm_sq += col[i] * col[i];
    rdiag_[k] = alpha;
    beta_[k] = 2.0 / vnorm_sq;
    for (std::size_t j = k + 1; j < m_; ++j) {
      double* cj = work_.data() + j * n_;
      double s = 0.0;
      for (std::size_t i = k; i < n_; ++i) s += col[i] * cj[i];
      s *= beta_[k];
      for (std::size_t i = k; i < n_; ++i) cj[i] -= s * col[i];
    }
  }
}

Vector HouseholderQR::apply_qt(std::span<const double> y) const {
  Vector z(y.begin(), y.end());
  for (std::size_t k = 0; k < m_; ++k) {
    if (beta_[k] == 0.0) continue;
    const double* v = work_.data() + k * n_;
    double s = 0.0;
    for (std::size_t i = k; i < n_; ++i) s += v[i] * z[i];
    s *= beta_[k];
    for (std::size_t i = k; i < n_; ++i) z[i] -= s * v[i];
  }
  return z;
}

Vector HouseholderQR::solve_r(std::span<const double> z) const {
  Vector x(m_);
  for (std::size_t kk = m_; kk-- > 0;) {
    double s = z[kk];
    for (std::size_t j = kk + 1; j < m_; ++j) s -= work_[j * n_ + kk] * x[j];
    if (rdiag_[kk] == 0.0) throw RankDeficientError("HouseholderQR: singular R factor");
    x[kk] = s / rdiag_[kk];
  }
  return x;
}

std::vector<double> HouseholderQR::r_colmajor() const {
  std::vector<double> r(m_ * m_, 0.0);
  for (std::size_t j = 0; j < m_; ++j) {
    for (std::size_t i = 0; i < j; ++i) r[j * m_ + i] = work_[j * n_ + i];
    r[j * m_ + j] = rdiag_[j];
  }
  return r;
}

namespace {

// One-sided (Hestenes) Jacobi: orthogonalizes the columns of a square
// column-major matrix; the resulting column norms are its singular values.
Vector one_sided_jacobi(std::vector<double> u, std::size_t m) {
  const double tol = std::sqrt(static_cast<double>(m)) * std::numeric_limits<double>::epsilon();
  constexpr std::size_t kMaxSweeps = 100;
  bool rotated = true;
  for (std::size_t sweep = 0; rotated; ++sweep) {
    if (sweep == kMaxSweeps) throw ConvergenceError("singular_values: one-sided Jacobi stalled");
    rotated = false;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        double* up = u.data() + p * m;
        double* uq = u.data() + q * m;
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += up[i] * up[i];
          beta += uq[i] * uq[i];
          gamma += up[i] * uq[i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double a = up[i];
          up[i] = c * a - s * uq[i];
          uq[i] = s * a + c * uq[i];
        }
      }
    }
  }
  Vector sv(m);
  for (std::size_t j = 0; j < m; ++j) sv[j] = norm2(std::span<const double>(u.data() + j * m, m));
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

void require_full_rank(const Vector& sv) {
  if (sv.empty()) throw RankDeficientError("matrix has no columns");
  if (!(sv.back() >= 1e-10 * sv.front()) || sv.front() == 0.0) {
    throw RankDeficientError("matrix is rank deficient: sigma_min/sigma_max = " +
                             std::to_string(sv.front() == 0.0 ? 0.0 : sv.back() / sv.front()));
  }
}

}  // namespace

Vector singular_values(const DenseMatrix& A) {
  HouseholderQR qr(A);
  return one_sided_jacobi(qr.r_colmajor(), A.cols());
}

double smallest_singular_value(const DenseMatrix& A) {
  auto sv = singular_values(A);
  require_full_rank(sv);
  return sv.back();
}

Vector least_squares_oracle(const DenseMatrix& A, std::span<const double> b) {
  if (b.size() != A.rows()) throw std::invalid_argument("least_squares_oracle: rhs length mismatch");
  HouseholderQR qr(A);
  require_full_rank(one_sided_jacobi(qr.r_colmajor(), A.cols()));
  return qr.solve_r(qr.apply_qt(b));
}

}  // namespace wbsgd
