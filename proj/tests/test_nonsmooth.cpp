#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wbsgd/linalg.hpp"
#include "wbsgd/nonsmooth.hpp"

using namespace wbsgd;

namespace {

HingeLossProblem svm(std::size_t n, std::size_t m, std::uint64_t seed, double lambda = 0.1) {
  GeneratorSpec s{.family = Family::svm_gaussian, .n = n, .m = m, .seed = seed, .lambda = lambda};
  return std::get<HingeLossProblem>(generate(s));
}

Partition identity_partition(std::size_t n, std::size_t b) {
  std::vector<std::vector<Index>> batches(n / b);
  for (Index i = 0; i < n; ++i) batches[i / b].push_back(i);
  return Partition(batches, Strategy::sequential);
}

}  // namespace

TEST_CASE("m_alpha") {
  CHECK(m_alpha(0.5) == doctest::Approx(1.0 + std::log(2.0)).epsilon(1e-15));
  CHECK(std::abs(m_alpha(0.5) - 1.6931471805599454) < 1e-15);
  for (double a : {0.01, 0.1, 0.3, 0.7, 0.9, 0.99}) {
    CHECK(std::abs(m_alpha(a) - (1.0 + std::log(1.0 / std::min(a, 1.0 - a)))) <= 1e-15);
    CHECK(m_alpha(a) >= 1.0);
  }
  CHECK(m_alpha(1e-6) > m_alpha(0.1));
  CHECK(m_alpha(1 - 1e-6) > m_alpha(0.9));
  for (double a : {0.0, 1.0, -0.5, 2.0}) CHECK_THROWS_AS(m_alpha(a), std::invalid_argument);
}

TEST_CASE("plan_nonsmooth") {
  LipschitzTable G;
  G.values = {1.1, 1.1};
  G.mean = 1.1;
  const auto plan = plan_nonsmooth(G, 0.1, 0.01, 0.5, 2.0);
  CHECK(plan.predicted_iterations ==
        static_cast<std::size_t>(std::ceil(2.0 * m_alpha(0.5) * 1.21 / (0.1 * 0.01))));
  CHECK(plan.mu == 0.1);
  CHECK_THROWS(plan_nonsmooth(G, 0.0, 0.01));
  CHECK_THROWS(plan_nonsmooth(G, 0.1, 0.0));
  CHECK_THROWS(plan_nonsmooth(G, 0.1, 0.01, 1.0));

  // Orthonormal signed rows: G = 1/sqrt(b) + lambda, so b=4 costs about a
  // quarter of b=1 when lambda is small.
  GeneratorSpec s{.family = Family::orthonormal, .n = 16, .m = 16};
  const auto A = std::get<LeastSquaresProblem>(generate(s)).A;
  const double lambda = 1e-4;
  const auto g1 = lipschitz_hinge(A, partition_random(16, 1, 0), lambda, EstimatorConfig{});
  const auto g4 = lipschitz_hinge(A, partition_random(16, 4, 0), lambda, EstimatorConfig{});
  CHECK(g4.mean == doctest::Approx(0.5 + lambda).epsilon(1e-12));
  const double k1 = static_cast<double>(plan_nonsmooth(g1, lambda, 1e-3).predicted_iterations);
  const double k4 = static_cast<double>(plan_nonsmooth(g4, lambda, 1e-3).predicted_iterations);
  CHECK(k1 / k4 == doctest::Approx(std::pow((1 + lambda) / (0.5 + lambda), 2)).epsilon(1e-6));
}

TEST_CASE("hinge_subgradient_batch examples") {
  const HingeLossProblem p{DenseMatrix(3, 2, {1, 0, 0, 1, 1, -1}), {1, -1, 1}, 0.5};
  const std::vector<Index> tau{0, 1, 2};
  SUBCASE("x = 0 activates every row") {
    const auto g = hinge_subgradient_batch(p, tau, Vector{0.0, 0.0});
    CHECK(g[0] == doctest::Approx(-(1.0 + 0.0 + 1.0) / 3.0));
    CHECK(g[1] == doctest::Approx(-(0.0 - 1.0 - 1.0) / 3.0));
  }
  SUBCASE("all margins at least 1 leaves lambda x") {
    const Vector x{3.0, -3.0};
    const auto g = hinge_subgradient_batch(p, tau, x);
    CHECK(g[0] == doctest::Approx(1.5));
    CHECK(g[1] == doctest::Approx(-1.5));
  }
  SUBCASE("margin exactly 1 is inactive and the result lies between one-sided slopes") {
    const HingeLossProblem q{DenseMatrix(1, 1, {1.0}), {1}, 0.5};
    const std::vector<Index> one{0};
    const Vector x{1.0};
    const double g = hinge_subgradient_batch(q, one, x)[0];
    CHECK(g == doctest::Approx(0.5));
    auto F = [&](double v) { return std::max(0.0, 1.0 - v) + 0.25 * v * v; };
    const double h = 1e-7;
    const double right = (F(1.0 + h) - F(1.0)) / h;
    const double left = (F(1.0) - F(1.0 - h)) / h;
    CHECK(g <= right + 1e-6);
    CHECK(g >= left - 1e-6);
  }
  CHECK_THROWS(hinge_subgradient_batch(p, tau, Vector{0.0}));
}

TEST_CASE("full-batch subgradient satisfies the subgradient inequality") {
  const auto p = svm(50, 4, 3);
  const auto all = identity_partition(50, 50);
  for (unsigned t = 0; t < 100; ++t) {
    const auto x = oracle::gaussian_vector(4, 2 * t);
    const auto z = oracle::gaussian_vector(4, 2 * t + 1);
    const auto g = hinge_subgradient_batch(p, all.batch(0), x);
    const auto sg = subgradient_hinge(p, x);
    double lin = 0.0;
    for (int j = 0; j < 4; ++j) {
      lin += g[j] * (z[j] - x[j]);
      CHECK(std::abs(g[j] - sg[j]) < 1e-12);
    }
    CHECK(objective_hinge(p, z) >= objective_hinge(p, x) + lin - 1e-10);
  }
}

TEST_CASE("weighted batch subgradient is unbiased (exhaustive)") {
  const auto p = svm(200, 5, 4);
  const auto sr = signed_rows(p);
  for (std::size_t b : {1, 5, 20}) {
    const auto P = partition_sequential(row_norms_sq(p.A), b);
    const auto W = weights_nonsmooth(lipschitz_hinge(sr, P, p.lambda, EstimatorConfig{}));
    const double d = static_cast<double>(P.count());
    for (unsigned t = 0; t < 20; ++t) {
      auto x = oracle::gaussian_vector(5, 100 + t);
      for (auto& v : x) v *= 0.3;
      Vector est(5, 0.0);
      for (std::size_t i = 0; i < P.count(); ++i) {
        const auto g = hinge_subgradient_batch(p, P.batch(i), x);
        for (int j = 0; j < 5; ++j) est[j] += W.probabilities[i] / (d * W.probabilities[i]) * g[j];
      }
      const auto full = subgradient_hinge(p, x);
      for (int j = 0; j < 5; ++j) CHECK(std::abs(est[j] - full[j]) <= 1e-10);
    }
  }
}

TEST_CASE("SuffixAverage matches a stored-iterate mean") {
  for (double alpha : {0.5, 0.25, 0.9}) {
    const Vector x0{0.0, 0.0};
    SuffixAverage avg(alpha, x0);
    std::vector<Vector> stored;
    std::size_t lagged = 0;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    CHECK(avg.mean() == x0);
    for (std::size_t k = 1; k <= 10000; ++k) {
      stored.push_back({nd(rng), 1.0 + nd(rng)});
      avg.push(stored.back());
      const std::size_t j = SuffixAverage::lag_index(alpha, k);
      while (lagged < j) avg.push_lagged(stored[lagged++]);
      if (k % 97 != 0 && k != 10000 && k > 5) continue;
      const std::size_t keep = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(k)));
      CHECK(k - j == keep);
      double m0 = 0.0, m1 = 0.0;
      for (std::size_t i = k - keep; i < k; ++i) {
        m0 += stored[i][0];
        m1 += stored[i][1];
      }
      const auto got = avg.mean();
      CHECK(std::abs(got[0] - m0 / keep) <= 1e-12);
      CHECK(std::abs(got[1] - m1 / keep) <= 1e-12);
    }
  }
  SuffixAverage bad(0.5, Vector{0.0});
  CHECK_THROWS_AS(bad.push_lagged(Vector{1.0}), std::logic_error);
  CHECK_THROWS(SuffixAverage(1.0, Vector{0.0}));
}

TEST_CASE("single batch reduces to deterministic subgradient descent") {
  const auto p = svm(30, 3, 5);
  const auto P = identity_partition(30, 30);
  const auto W = weights_uniform(1);
  NonSmoothState s(Vector(3, 0.0), 30);
  oracle::Vec x = oracle::Vec::Zero(3);
  Rng rng(0);
  for (int k = 1; k <= 200; ++k) {
    step_nonsmooth(s, p, P, W, rng);
    const Vector xv(x.data(), x.data() + 3);
    const auto g = subgradient_hinge(p, xv);
    for (int j = 0; j < 3; ++j) x(j) -= g[j] / (p.lambda * k);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(s.x[j] - x(j)) <= 1e-10 * std::max(1.0, x.norm()));
  }
}

TEST_CASE("inactive hinge gives the closed-form decay x_{k+1} = x_k (1 - 1/(k d p))") {
  // Margins stay far above 1, so only the regularizer acts. Starting at k = 5
  // keeps every factor positive (at k = 1 with d p = 1 the iterate hits 0).
  const HingeLossProblem p{DenseMatrix(2, 1, {1.0, -1.0}), {1, -1}, 0.01};
  const auto P = identity_partition(2, 1);
  LipschitzTable G;
  G.values = {1.0, 3.0};
  G.mean = 2.0;
  const auto W = weights_nonsmooth(G);  // p = [0.25, 0.75], d p = [0.5, 1.5]
  NonSmoothState s(Vector{1000.0}, 1);
  s.iteration = 4;  // next step is k = 5
  double x = 1000.0;
  for (std::size_t i : {0u, 1u, 1u, 0u, 1u}) {
    const double k = static_cast<double>(s.iteration + 1);
    apply_nonsmooth_update(s, p, P, W, i);
    x *= 1.0 - 1.0 / (k * 2.0 * W.probabilities[i]);
    CHECK(s.x[0] == doctest::Approx(x).epsilon(1e-14));
  }
}

TEST_CASE("run_nonsmooth") {
  const auto p = svm(100, 5, 6);
  const auto ref = hinge_reference_minimizer(p);
  const auto P = partition_random(100, 5, 1);
  const auto G = lipschitz_hinge(signed_rows(p), P, p.lambda, EstimatorConfig{});
  SolveConfig cfg;
  cfg.seed = 3;
  cfg.max_iterations = 4000;
  cfg.stop_at_target = false;
  cfg.epsilon = 1e-3;
  const auto r = run_nonsmooth(p, P, G, cfg, ref.objective);
  CHECK(r.budget == 4000);
  CHECK(r.iterations == 4000);
  CHECK(r.trace.back().iteration == 4000);
  for (const auto& t : r.trace) CHECK(t.value >= -1e-6);
  CHECK(r.trace.back().value < r.trace.front().value);
  CHECK(r.trace.back().value < 1e-2);
  CHECK(objective_hinge(p, r.x) - ref.objective == doctest::Approx(r.trace.back().value));

  SolveConfig early = cfg;
  early.stop_at_target = true;
  early.target = 1e-2;
  const auto e = run_nonsmooth(p, P, G, early, ref.objective);
  REQUIRE(e.iterations_to_target);
  CHECK(e.iterations == *e.iterations_to_target);
  CHECK(e.trace.back().value <= 1e-2);

  // Budget defaults to 50 epochs regardless of the advisory prediction.
  SolveConfig def;
  def.epsilon = 1e-12;
  def.stop_at_target = false;
  const auto d = run_nonsmooth(p, P, G, def, ref.objective);
  CHECK(d.budget == 50 * P.count());
  CHECK(d.predicted_iterations > d.budget);
}

TEST_CASE("regularizer-dominated problem converges to x* = 0-neighbourhood minimum") {
  // lambda large: x* = (1/(n lambda)) sum y a with every margin active.
  auto p = svm(40, 3, 8, 50.0);
  const auto ref = hinge_reference_minimizer(p);
  const auto P = partition_random(40, 4, 2);
  SolveConfig cfg;
  cfg.seed = 1;
  cfg.max_iterations = 20000;
  cfg.stop_at_target = false;
  const auto r = solve_nonsmooth(p, P, cfg);
  CHECK(r.trace.back().value <= 1e-6);
}

TEST_CASE("weighted sampling needs no more iterations than uniform on skewed rows") {
  // Signed rows with norms growing like k.
  GeneratorSpec gs{.family = Family::gaussian_var_k2, .n = 100, .m = 5, .seed = 3};
  const auto A = std::get<LeastSquaresProblem>(generate(gs)).A;
  const auto base = svm(100, 5, 3);
  const HingeLossProblem p{A, base.labels, 0.1};
  const auto ref = hinge_reference_minimizer(p);
  const auto P = partition_sequential(row_norms_sq(A), 5);
  const auto G = lipschitz_hinge(signed_rows(p), P, p.lambda, EstimatorConfig{});
  std::vector<std::size_t> w, u;
  for (std::uint64_t t = 0; t < 40; ++t) {
    SolveConfig cfg;
    cfg.seed = t;
    cfg.max_iterations = 200000;
    cfg.target = 1e-3;
    cfg.geometric_ratio = 1.1;
    const auto rw = run_nonsmooth(p, P, G, cfg, ref.objective);
    cfg.mode = SamplingMode::uniform;
    const auto ru = run_nonsmooth(p, P, G, cfg, ref.objective);
    w.push_back(rw.iterations_to_target.value_or(SIZE_MAX));
    u.push_back(ru.iterations_to_target.value_or(SIZE_MAX));
  }
  std::sort(w.begin(), w.end());
  std::sort(u.begin(), u.end());
  CAPTURE(w[20]);
  CAPTURE(u[20]);
  CHECK(w[20] <= u[20]);
}
