#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "wbsgd/errors.hpp"
#include "wbsgd/linalg.hpp"
#include "wbsgd/problems.hpp"

using namespace wbsgd;

namespace {

LeastSquaresProblem ls(const GeneratorSpec& s) { return std::get<LeastSquaresProblem>(generate(s)); }

// Length of the segment of origin + t*dir inside [0,N]^2 (Liang-Barsky clip).
double clipped_length(double N, double ox, double oy, double dx, double dy) {
  double t0 = -1e300, t1 = 1e300;
  auto clip = [&](double o, double d) {
    if (d == 0.0) {
      if (o < 0.0 || o > N) t1 = -1e300;
      return;
    }
    double a = (0.0 - o) / d, b = (N - o) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  };
  clip(ox, dx);
  clip(oy, dy);
  return t1 > t0 ? (t1 - t0) * std::hypot(dx, dy) : 0.0;
}

double hinge_oracle(const HingeLossProblem& p, const Vector& x) {
  const auto A = oracle::to_eigen(p.A);
  const auto xv = oracle::to_eigen(x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    s += std::max(0.0, 1.0 - p.labels[static_cast<std::size_t>(i)] * A.row(i).dot(xv));
  return s / static_cast<double>(A.rows()) + 0.5 * p.lambda * xv.squaredNorm();
}

}  // namespace

TEST_CASE("family names round trip") {
  for (auto f : {Family::gaussian, Family::gaussian_var_k2, Family::correlated_uniform_var_k2,
                 Family::orthonormal, Family::sparse_gaussian, Family::tomography,
                 Family::svm_gaussian})
    CHECK(parse_family(to_string(f)) == f);
  CHECK_THROWS_AS(parse_family("dft"), std::invalid_argument);
  CHECK_FALSE(is_least_squares(Family::svm_gaussian));
}

TEST_CASE("generator validation") {
  GeneratorSpec s;
  s.n = 10;
  s.m = 20;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
  s.n = 20;
  s.noise_norm = -1;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
  s.noise_norm = 0;
  s.m = 10;
  s.family = Family::orthonormal;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
  s.family = Family::sparse_gaussian;
  s.density = 0.0;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
  s.family = Family::tomography;
  s.grid_n = 1;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
}

TEST_CASE("consistent gaussian system") {
  GeneratorSpec s;
  s.n = 1000;
  s.m = 50;
  s.seed = 3;
  const auto p = ls(s);
  REQUIRE(p.x_star);
  CHECK(*p.residual_norm <= 1e-8);
  for (std::size_t j = 0; j < 50; ++j) CHECK(std::abs((*p.x_star)[j] - (*p.x_true)[j]) < 1e-8);
  // n * ||a_i||^2 concentrates around n*m.
  const auto norms = row_norms_sq(p.A);
  const double mean = std::accumulate(norms.begin(), norms.end(), 0.0) / 1000.0;
  CHECK(mean == doctest::Approx(50.0).epsilon(0.05));
  CHECK(*std::max_element(norms.begin(), norms.end()) < 2.5 * 50.0);
  CHECK(ls(s).A.data()[7] == p.A.data()[7]);
}

TEST_CASE("gaussian_var_k2 row norms track k^2") {
  // Averaged over 40 seeds, ||a_k||^2 ~ m k^2 with correlation above 0.99.
  const std::size_t n = 1000, m = 50;
  std::vector<double> avg(n, 0.0);
  for (unsigned seed = 0; seed < 40; ++seed) {
    GeneratorSpec s{.family = Family::gaussian_var_k2, .n = n, .m = m, .seed = seed};
    const auto norms = row_norms_sq(ls(s).A);
    for (std::size_t i = 0; i < n; ++i) avg[i] += norms[i] / 40.0;
  }
  oracle::Vec k2(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    k2(i) = static_cast<double>((i + 1) * (i + 1));
    v(i) = avg[i];
  }
  const double corr = ((k2.array() - k2.mean()) * (v.array() - v.mean())).sum() /
                      std::sqrt((k2.array() - k2.mean()).square().sum() *
                                (v.array() - v.mean()).square().sum());
  CHECK(corr > 0.99);
  CHECK(avg[n - 1] / (m * 1e6) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("correlated_uniform_var_k2 entries lie in [0, sqrt(3) k]") {
  GeneratorSpec s{.family = Family::correlated_uniform_var_k2, .n = 60, .m = 8, .seed = 2};
  const auto p = ls(s);
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      CHECK(p.A(i, j) >= 0.0);
      CHECK(p.A(i, j) <= std::sqrt(3.0) * static_cast<double>(i + 1));
    }
}

TEST_CASE("orthonormal family") {
  GeneratorSpec s{.family = Family::orthonormal, .n = 200, .m = 200};
  const auto A = oracle::to_eigen(ls(s).A);
  const oracle::Mat G = A.transpose() * A;
  CHECK((G - oracle::Mat::Identity(200, 200)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sparse family keeps roughly the requested density") {
  GeneratorSpec s{.family = Family::sparse_gaussian, .n = 400, .m = 50, .seed = 9, .density = 0.2};
  const auto p = ls(s);
  const auto d = p.A.data();
  const double nz = static_cast<double>(std::count_if(d.begin(), d.end(), [](double v) { return v != 0.0; }));
  CHECK(nz / static_cast<double>(d.size()) == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("noise has exactly the requested norm") {
  for (unsigned seed = 0; seed < 5; ++seed) {
    GeneratorSpec s{.family = Family::gaussian, .n = 100, .m = 10, .seed = seed, .noise_norm = 1.0};
    const auto p = ls(s);
    auto e = matvec(p.A, *p.x_true);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = p.rhs[i] - e[i];
    CHECK(norm2(e) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*p.residual_norm <= 1.0 + 1e-8);
    CHECK(*p.residual_norm > 0.5);
  }
}

TEST_CASE("x_star passes the normal equations") {
  GeneratorSpec s{.family = Family::gaussian_var_k2, .n = 120, .m = 12, .seed = 4, .noise_norm = 2.0};
  const auto p = ls(s);
  const auto g = gradient_ls(p, *p.x_star);
  CHECK(norm2(g) <= 1e-8 * frobenius_sq(p.A) * norm2(p.rhs));
  const auto want = oracle::least_squares(oracle::to_eigen(p.A), oracle::to_eigen(p.rhs));
  for (int j = 0; j < 12; ++j) CHECK(std::abs((*p.x_star)[j] - want(j)) < 1e-8 * want.norm());
}

TEST_CASE("trace_line") {
  SUBCASE("horizontal line through the middle of the bottom row") {
    const auto hits = trace_line(2, -1.0, 0.5, 1.0, 0.0);
    Vector row(4, 0.0);
    for (auto h : hits) row[h.cell] += h.length;
    CHECK(row[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(row[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(row[2] == 0.0);
    CHECK(row[3] == 0.0);
  }
  SUBCASE("line missing the grid") { CHECK(trace_line(3, -1.0, 5.0, 1.0, 0.0).empty()); }
  SUBCASE("row sums equal the clipped segment length") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-2.0, 7.0), ang(0.0, 6.283185307179586);
    int tested = 0;
    for (int t = 0; t < 200; ++t) {
      const double ox = u(rng), oy = u(rng), a = ang(rng);
      const double dx = std::cos(a), dy = std::sin(a);
      const double want = clipped_length(5.0, ox, oy, dx, dy);
      const auto hits = trace_line(5, ox, oy, dx, dy);
      double got = 0.0;
      for (auto h : hits) {
        CHECK(h.length >= 0.0);
        CHECK(h.cell < 25);
        got += h.length;
      }
      CHECK(hits.size() <= 9);
      CHECK(std::abs(got - want) < 1e-10);
      tested += want > 0.0;
    }
    CHECK(tested > 50);
  }
}

TEST_CASE("tomography systems") {
  SUBCASE("N=2, f=3") {
    const auto p = generate_tomography(2, 3, 5);
    CHECK(p.A.rows() == 12);
    CHECK(p.A.cols() == 4);
    for (std::size_t i = 0; i < 12; ++i) {
      int nz = 0;
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(p.A(i, j) >= 0.0);
        nz += p.A(i, j) != 0.0;
      }
      CHECK(nz <= 3);
      CHECK(nz >= 1);
    }
    CHECK(*p.residual_norm <= 1e-8);
  }
  SUBCASE("N=20, f=3 matches 1200x400") {
    GeneratorSpec s{.family = Family::tomography, .seed = 1, .grid_n = 20, .oversample = 3};
    const auto p = ls(s);
    CHECK(p.A.rows() == 1200);
    CHECK(p.A.cols() == 400);
    for (std::size_t i = 0; i < 1200; ++i) {
      int nz = 0;
      for (std::size_t j = 0; j < 400; ++j) nz += p.A(i, j) != 0.0;
      CHECK(nz <= 39);
    }
    for (double v : *p.x_true) CHECK(v >= 0.0);
  }
}

TEST_CASE("least-squares objective and error") {
  LeastSquaresProblem p{DenseMatrix::identity(2), Vector{0.0, 0.0}, Vector{0.0, 0.0}, 0.0, {}};
  CHECK(objective_ls(p, Vector{1.0, 0.0}) == 0.5);
  CHECK(error_ls(p, Vector{3.0, 4.0}) == 5.0);
  LeastSquaresProblem q{DenseMatrix::identity(2), Vector{0.0, 0.0}, {}, {}, {}};
  CHECK_THROWS_AS(error_ls(q, Vector{0.0, 0.0}), std::logic_error);

  GeneratorSpec s{.family = Family::gaussian, .n = 50, .m = 5, .seed = 8};
  const auto r = ls(s);
  CHECK(objective_ls(r, *r.x_star) < 1e-20);
  CHECK(error_ls(r, *r.x_star) == 0.0);
  const auto x = oracle::gaussian_vector(5, 99);
  const oracle::Vec res = oracle::to_eigen(r.A) * oracle::to_eigen(x) - oracle::to_eigen(r.rhs);
  CHECK(oracle::rel_diff(objective_ls(r, x), 0.5 * res.squaredNorm()) < 1e-12);
}

TEST_CASE("hinge objective") {
  GeneratorSpec s{.family = Family::svm_gaussian, .n = 80, .m = 6, .seed = 2, .lambda = 0.1};
  const auto p = std::get<HingeLossProblem>(generate(s));
  for (int y : p.labels) CHECK((y == 1 || y == -1));
  CHECK(objective_hinge(p, Vector(6, 0.0)) == 1.0);
  for (unsigned t = 0; t < 10; ++t) {
    const auto x = oracle::gaussian_vector(6, 200 + t);
    CHECK(oracle::rel_diff(objective_hinge(p, x), hinge_oracle(p, x)) < 1e-12);
  }
  // Separated: margins all >= 1 leaves only the regularizer.
  const HingeLossProblem sep{DenseMatrix(2, 1, {1.0, -1.0}), {1, -1}, 0.5};
  CHECK(objective_hinge(sep, Vector{2.0}) == doctest::Approx(0.25 * 4.0));
}

TEST_CASE("hinge objective is convex along random segments") {
  GeneratorSpec s{.family = Family::svm_gaussian, .n = 60, .m = 4, .seed = 5};
  const auto p = std::get<HingeLossProblem>(generate(s));
  for (unsigned t = 0; t < 100; ++t) {
    const auto x = oracle::gaussian_vector(4, 2 * t);
    const auto z = oracle::gaussian_vector(4, 2 * t + 1);
    Vector mid(4);
    for (int j = 0; j < 4; ++j) mid[j] = 0.5 * (x[j] + z[j]);
    CHECK(objective_hinge(p, mid) <= 0.5 * (objective_hinge(p, x) + objective_hinge(p, z)) + 1e-12);
  }
}

TEST_CASE("subgradient_hinge") {
  const HingeLossProblem p{DenseMatrix(2, 2, {1, 0, 0, 2}), {1, -1}, 0.5};
  // x = 0: every margin is active, g = -(1/n) sum y a.
  const auto g = subgradient_hinge(p, Vector{0.0, 0.0});
  CHECK(g[0] == doctest::Approx(-0.5));
  CHECK(g[1] == doctest::Approx(1.0));
  const auto sr = signed_rows(p);
  CHECK(sr(1, 1) == -2.0);
}

TEST_CASE("hinge reference minimizer") {
  SUBCASE("one sample, y=1, a=e1") {
    for (double lambda : {0.25, 0.5, 1.0, 2.0, 8.0}) {
      const HingeLossProblem p{DenseMatrix(1, 2, {1.0, 0.0}), {1}, lambda};
      const auto ref = hinge_reference_minimizer(p);
      CHECK(ref.x[0] == doctest::Approx(std::min(1.0 / lambda, 1.0)).epsilon(1e-6));
      CHECK(std::abs(ref.x[1]) < 1e-9);
      CHECK(ref.duality_gap <= 1e-12);
    }
  }
  SUBCASE("large lambda keeps every margin active: x* = (1/(n lambda)) sum y a") {
    GeneratorSpec s{.family = Family::svm_gaussian, .n = 50, .m = 5, .seed = 6};
    auto p = std::get<HingeLossProblem>(generate(s));
    const auto norms = row_norms_sq(p.A);
    p.lambda = 10.0 * std::sqrt(*std::max_element(norms.begin(), norms.end()));
    const auto ref = hinge_reference_minimizer(p);
    const auto sr = oracle::to_eigen(signed_rows(p));
    const oracle::Vec want = sr.colwise().sum().transpose() / (50.0 * p.lambda);
    for (int j = 0; j < 5; ++j) CHECK(std::abs(ref.x[j] - want(j)) < 1e-9);
  }
  SUBCASE("duplicated rows leave the minimizer unchanged") {
    GeneratorSpec s{.family = Family::svm_gaussian, .n = 40, .m = 3, .seed = 7};
    const auto p = std::get<HingeLossProblem>(generate(s));
    std::vector<double> d;
    std::vector<int> y;
    for (int rep = 0; rep < 2; ++rep)
      for (std::size_t i = 0; i < 40; ++i) {
        const auto r = p.A.row(i);
        d.insert(d.end(), r.begin(), r.end());
        y.push_back(p.labels[i]);
      }
    const HingeLossProblem dup{DenseMatrix(80, 3, std::move(d)), std::move(y), p.lambda};
    const auto a = hinge_reference_minimizer(p);
    const auto b = hinge_reference_minimizer(dup);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(a.x[j] - b.x[j]) < 1e-6);
    CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-10));
  }
  SUBCASE("no random point beats the reference") {
    GeneratorSpec s{.family = Family::svm_gaussian, .n = 100, .m = 4, .seed = 8};
    const auto p = std::get<HingeLossProblem>(generate(s));
    const auto ref = hinge_reference_minimizer(p);
    CHECK(objective_hinge(p, ref.x) == doctest::Approx(ref.objective).epsilon(1e-14));
    for (unsigned t = 0; t < 200; ++t) {
      auto z = oracle::gaussian_vector(4, 500 + t);
      for (int j = 0; j < 4; ++j) z[j] = ref.x[j] + 0.01 * z[j];
      CHECK(objective_hinge(p, z) >= ref.objective - 1e-12);
    }
  }
}
