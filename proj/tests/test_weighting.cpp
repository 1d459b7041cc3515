#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "wbsgd/problems.hpp"
#include "wbsgd/weighting.hpp"

using namespace wbsgd;

namespace {

LipschitzTable table(Vector v) {
  LipschitzTable t;
  t.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  t.values = std::move(v);
  return t;
}

DenseMatrix orthonormal(std::size_t n) {
  GeneratorSpec s{.family = Family::orthonormal, .n = n, .m = n};
  return std::get<LeastSquaresProblem>(generate(s)).A;
}

void check_distribution(const WeightTable& W) {
  double s = 0.0;
  for (double p : W.probabilities) {
    CHECK(p >= 0.0);
    s += p;
  }
  CHECK(std::abs(s - 1.0) <= 1e-12);
  CHECK(W.cumulative.back() == 1.0);
  CHECK(std::is_sorted(W.cumulative.begin(), W.cumulative.end()));
}

// Multinomial check: every bucket within 3 sigma of its expectation... with
// d buckets some slack is needed, so allow 4 sigma.
void check_frequencies(const WeightTable& W, std::uint64_t seed, std::size_t draws) {
  Rng rng(seed);
  std::vector<std::size_t> hits(W.count(), 0);
  for (std::size_t t = 0; t < draws; ++t) ++hits[sample(W, rng)];
  double chi2 = 0.0;
  for (std::size_t i = 0; i < W.count(); ++i) {
    const double p = W.probabilities[i];
    const double mean = p * static_cast<double>(draws);
    const double sd = std::sqrt(static_cast<double>(draws) * p * (1.0 - p));
    CHECK(std::abs(static_cast<double>(hits[i]) - mean) <= 4.0 * sd + 1e-9);
    if (p > 0) chi2 += (hits[i] - mean) * (hits[i] - mean) / mean;
  }
  // chi-square with d-1 dof; mean d-1, sd sqrt(2(d-1)).
  const double dof = static_cast<double>(W.count() - 1);
  CHECK(chi2 <= dof + 5.0 * std::sqrt(2.0 * dof) + 1.0);
}

}  // namespace

TEST_CASE("estimator names round trip") {
  for (auto k : {EstimatorKind::exact, EstimatorKind::max_norm, EstimatorKind::power})
    CHECK(parse_estimator(to_string(k)) == k);
  CHECK_THROWS(parse_estimator("lanczos"));
}

TEST_CASE("lipschitz_ls on orthonormal rows") {
  const auto A = orthonormal(4);
  const auto L = lipschitz_ls(A, partition_random(4, 2, 1), EstimatorConfig{});
  for (double v : L.values) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(L.mean == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(L.norm_sq_sum() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("b = 1 makes every estimator agree on n ||a_i||^2") {
  const auto A = oracle::gaussian_matrix(15, 6, 8);
  const auto P = partition_random(15, 1, 2);
  const auto norms = row_norms_sq(A);
  for (auto kind : {EstimatorKind::exact, EstimatorKind::max_norm, EstimatorKind::power}) {
    const auto L = lipschitz_ls(A, P, EstimatorConfig{kind, 0.01, 3});
    for (std::size_t i = 0; i < 15; ++i)
      CHECK(oracle::rel_diff(L.values[i], 15.0 * norms[P.batch(i)[0]]) < 1e-12);
  }
}

TEST_CASE("estimators compared on random batches") {
  const auto A = oracle::gaussian_matrix(64, 30, 10);
  const auto P = partition_random(64, 8, 4);
  const auto exact = lipschitz_ls(A, P, EstimatorConfig{EstimatorKind::exact});
  const auto maxn = lipschitz_ls(A, P, EstimatorConfig{EstimatorKind::max_norm});
  const auto pw = lipschitz_ls(A, P, EstimatorConfig{EstimatorKind::power, 0.01, 9});
  const auto norms = row_norms_sq(A);
  for (std::size_t i = 0; i < P.count(); ++i) {
    double tr = 0.0;
    for (auto r : P.batch(i)) tr += norms[r];
    // Trace bound: exact <= b * max_norm.
    CHECK(exact.values[i] <= 8.0 * maxn.values[i] + 1e-10);
    CHECK(exact.values[i] <= (64.0 / 8.0) * tr + 1e-10);
    CHECK(maxn.values[i] <= exact.values[i] + 1e-10);
    CHECK(pw.values[i] <= exact.values[i] * (1 + 1e-12) + 1e-8);
    CHECK(pw.values[i] >= exact.values[i] / 1.01 - 1e-8);
  }
  CHECK(pw.precompute_flops == doctest::Approx(8.0 * power_iteration_count(0.01, 8) * 64.0));
  CHECK(maxn.precompute_flops > 0.0);
}

TEST_CASE("lipschitz_hinge") {
  SUBCASE("orthonormal signed rows, b=4, lambda=0.1") {
    const auto A = orthonormal(8);
    const auto G = lipschitz_hinge(A, partition_random(8, 4, 0), 0.1, EstimatorConfig{});
    for (double v : G.values) CHECK(v == doctest::Approx(0.6).epsilon(1e-12));
  }
  SUBCASE("b=1 gives ||a_i|| + lambda") {
    const auto A = oracle::gaussian_matrix(10, 3, 1);
    const auto P = partition_random(10, 1, 5);
    const auto G = lipschitz_hinge(A, P, 0.3, EstimatorConfig{});
    const auto norms = row_norms_sq(A);
    for (std::size_t i = 0; i < 10; ++i)
      CHECK(oracle::rel_diff(G.values[i], std::sqrt(norms[P.batch(i)[0]]) + 0.3) < 1e-12);
  }
  SUBCASE("power backend within its bracket") {
    const auto A = oracle::gaussian_matrix(40, 12, 6);
    const auto P = partition_random(40, 5, 1);
    const auto exact = lipschitz_hinge(A, P, 0.1, EstimatorConfig{});
    const auto pw = lipschitz_hinge(A, P, 0.1, EstimatorConfig{EstimatorKind::power, 0.01, 2});
    for (std::size_t i = 0; i < P.count(); ++i) {
      const double te = exact.values[i] - 0.1, tp = pw.values[i] - 0.1;
      CHECK(tp <= te + 1e-8);
      CHECK(tp >= te / std::sqrt(1.01) - 1e-8);
    }
  }
  CHECK_THROWS(lipschitz_hinge(DenseMatrix::identity(2), partition_random(2, 1, 0), 0.0, EstimatorConfig{}));
}

TEST_CASE("weights_smooth") {
  const auto W = weights_smooth(table({1.0, 3.0}));
  CHECK(W.probabilities[0] == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(W.probabilities[1] == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(W.mode == WeightMode::smooth_weighted);
  check_distribution(W);

  const auto U = weights_smooth(table({2.0, 2.0, 2.0, 2.0}));
  for (double p : U.probabilities) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  const auto Z = weights_smooth(table({0.0, 0.0, 0.0}));
  CHECK(Z.uniform_fallback);
  CHECK(Z.mode == WeightMode::uniform);
  check_distribution(Z);
}

TEST_CASE("weights_smooth respects the 1/(2d) floor on random tables") {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> ln(0.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + rng() % 50;
    Vector v(d);
    for (auto& x : v) x = ln(rng);
    const auto W = weights_smooth(table(v));
    check_distribution(W);
    for (double p : W.probabilities) CHECK(p >= 1.0 / (2.0 * static_cast<double>(d)) - 1e-12);
  }
}

TEST_CASE("least-squares weight form matches the generic form") {
  // b/(2n) + ||A_tau||^2 / (2 sum ||A_tau_j||^2)
  for (unsigned seed = 0; seed < 10; ++seed) {
    GeneratorSpec s{.family = Family::gaussian_var_k2, .n = 60, .m = 5, .seed = seed};
    const auto A = std::get<LeastSquaresProblem>(generate(s)).A;
    const auto L = lipschitz_ls(A, partition_random(60, 6, seed), EstimatorConfig{});
    const auto W = weights_smooth(L);
    const double total = L.norm_sq_sum();
    for (std::size_t i = 0; i < L.count(); ++i) {
      const double want = 6.0 / 120.0 + L.batch_norms_sq[i] / (2.0 * total);
      CHECK(std::abs(W.probabilities[i] - want) <= 1e-12);
    }
  }
}

TEST_CASE("weights_nonsmooth") {
  const auto W = weights_nonsmooth(table({1.0, 1.0, 2.0}));
  CHECK(W.probabilities == Vector{0.25, 0.25, 0.5});
  CHECK(W.mode == WeightMode::nonsmooth_weighted);
  const auto U = weights_nonsmooth(table({5.0, 5.0}));
  CHECK(U.probabilities == Vector{0.5, 0.5});
  CHECK(weights_nonsmooth(table({0.0, 0.0})).uniform_fallback);
}

TEST_CASE("hinge weights match the least-squares-style closed form") {
  // (||A_tau|| + lambda sqrt(b)) / ((n/sqrt(b)) lambda + sum ||A_tau_j||)
  const double lambda = 0.2;
  GeneratorSpec s{.family = Family::svm_gaussian, .n = 48, .m = 6, .seed = 1, .lambda = lambda};
  const auto p = std::get<HingeLossProblem>(generate(s));
  const auto sr = signed_rows(p);
  for (std::size_t b : {1, 3, 4, 12}) {
    const auto G = lipschitz_hinge(sr, partition_random(48, b, b), lambda, EstimatorConfig{});
    const auto W = weights_nonsmooth(G);
    double sum_norm = 0.0;
    for (double v : G.batch_norms_sq) sum_norm += std::sqrt(v);
    const double sb = std::sqrt(static_cast<double>(b));
    for (std::size_t i = 0; i < G.count(); ++i) {
      const double want = (std::sqrt(G.batch_norms_sq[i]) + lambda * sb) / ((48.0 / sb) * lambda + sum_norm);
      CHECK(std::abs(W.probabilities[i] - want) <= 1e-12);
    }
  }
}

TEST_CASE("sample") {
  SUBCASE("degenerate table") {
    auto W = weights_nonsmooth(table({0.0, 1.0}));
    Rng rng(1);
    for (int t = 0; t < 10000; ++t) CHECK(sample(W, rng) == 1);
  }
  SUBCASE("uniform d=4") { check_frequencies(weights_uniform(4), 11, 1000000); }
  SUBCASE("p = [0.375, 0.625]") { check_frequencies(weights_smooth(table({1.0, 3.0})), 12, 1000000); }
  SUBCASE("skewed table with 20 buckets") {
    Vector v(20);
    for (std::size_t i = 0; i < 20; ++i) v[i] = static_cast<double>((i + 1) * (i + 1));
    check_frequencies(weights_nonsmooth(table(v)), 13, 1000000);
  }
}

TEST_CASE("mean Lipschitz constant only decreases with batching") {
  for (unsigned seed = 0; seed < 20; ++seed) {
    GeneratorSpec s{.family = Family::gaussian_var_k2, .n = 120, .m = 8, .seed = seed};
    const auto A = std::get<LeastSquaresProblem>(generate(s)).A;
    const auto L1 = lipschitz_ls(A, partition_random(120, 1, seed), EstimatorConfig{});
    for (std::size_t b : {2, 4, 5, 10}) {
      const auto Lb = lipschitz_ls(A, partition_random(120, b, seed + b), EstimatorConfig{});
      CHECK(Lb.mean <= L1.mean * (1 + 1e-10));
      // Triangle inequality per batch.
      const auto norms = row_norms_sq(A);
      const auto P = partition_random(120, b, seed + b);
      for (std::size_t i = 0; i < P.count(); ++i) {
        double s1 = 0.0;
        for (auto r : P.batch(i)) s1 += 120.0 * norms[r];
        CHECK(Lb.values[i] <= s1 / static_cast<double>(b) * (1 + 1e-10));
      }
    }
  }
}

TEST_CASE("orthonormal rows: mean L drops by exactly b") {
  const auto A = orthonormal(64);
  const double Lbar = lipschitz_ls(A, partition_random(64, 1, 0), EstimatorConfig{}).mean;
  for (std::size_t b : {2, 4, 8, 16})
    CHECK(oracle::rel_diff(lipschitz_ls(A, partition_random(64, b, b), EstimatorConfig{}).mean, Lbar / b) < 1e-10);
}

TEST_CASE("incoherent unit rows obey the Gershgorin bound") {
  // Random unit vectors in high dimension are nearly orthogonal.
  const std::size_t n = 40, m = 400, b = 4;
  auto G = oracle::to_eigen(oracle::gaussian_matrix(n, m, 21));
  G.rowwise().normalize();
  std::vector<double> d(G.data(), G.data() + n * m);
  const DenseMatrix A(n, m, std::move(d));
  const auto P = partition_random(n, b, 3);
  const auto L = lipschitz_ls(A, P, EstimatorConfig{});
  for (std::size_t i = 0; i < P.count(); ++i) {
    double coh = 0.0;
    for (auto r : P.batch(i))
      for (auto s : P.batch(i))
        if (r != s) coh = std::max(coh, std::abs(G.row(r).dot(G.row(s))));
    const double alpha = coh * static_cast<double>(b - 1);
    CHECK(L.values[i] <= (double(n) / b) * (1.0 + alpha) + 1e-10);
  }
}

TEST_CASE("weights CSV") {
  const auto L = table({1.0, 3.0});
  std::stringstream ss;
  write_weights_csv(ss, L, weights_smooth(L));
  CHECK(ss.str() == "batch_index,value,probability\n0,1,0.375\n1,3,0.625\n");
}
