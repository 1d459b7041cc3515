#include "wbsgd/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>

#include "wbsgd/textio.hpp"

namespace wbsgd {

namespace {

WeightTable finish(Vector p, WeightMode mode) {
  double total = 0.0;
  for (double v : p) total += v;
  for (auto& v : p) v /= total;
  WeightTable w;
  w.cumulative.resize(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    w.cumulative[i] = acc;
  }
  w.cumulative.back() = 1.0;
  w.probabilities = std::move(p);
  w.mode = mode;
  return w;
}

WeightTable uniform_fallback(std::size_t d, const char* who) {
  std::clog << "warning: " << who << ": Lipschitz values sum to zero; using uniform weights\n";
  auto w = weights_uniform(d);
  w.uniform_fallback = true;
  return w;
}

double flops_for(const SpectralEstimate& e, std::size_t b, std::size_t m) {
  const double dim = static_cast<double>(std::min(b, m));
  switch (e.method) {
    case SpectralMethod::max_norm:
      return static_cast<double>(b * m);
    case SpectralMethod::power:
      return static_cast<double>(e.iterations_used) * dim * dim;
    case SpectralMethod::converged:
      return 2.0 * static_cast<double>(e.iterations_used) * dim * dim * dim;
  }
  return 0.0;
}

// Fills norms and flop count for every batch; batches are independent.
void estimate_batches(const DenseMatrix& A, const Partition& P, const EstimatorConfig& est,
                      LipschitzTable& t) {
  if (P.n() != A.rows()) throw std::invalid_argument("lipschitz: partition does not cover A");
  const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(P.count());
  t.batch_norms_sq.assign(P.count(), 0.0);
  Vector flops(P.count(), 0.0);
  std::exception_ptr failure;
  [[maybe_unused]] const bool par = P.count() > 1 && A.rows() * A.cols() >= (1u << 15);
#pragma omp parallel for schedule(dynamic) if (par)
  for (std::ptrdiff_t i = 0; i < d; ++i) {
    try {
      const auto e = batch_norm_sq(A, P, static_cast<std::size_t>(i), est);
      t.batch_norms_sq[static_cast<std::size_t>(i)] = e.value;
      flops[static_cast<std::size_t>(i)] = flops_for(e, P.batch_size(), A.cols());
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  t.precompute_flops = 0.0;
  for (double f : flops) t.precompute_flops += f;
  t.estimator = est;
  t.n = P.n();
  t.batch_size = P.batch_size();
}

void set_mean(LipschitzTable& t) {
  double s = 0.0;
  for (double v : t.values) s += v;
  t.mean = s / static_cast<double>(t.values.size());
}

}  // namespace

std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::exact: return "exact";
    case EstimatorKind::max_norm: return "max_norm";
    case EstimatorKind::power: return "power";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view s) {
  if (s == "exact") return EstimatorKind::exact;
  if (s == "max_norm") return EstimatorKind::max_norm;
  if (s == "power") return EstimatorKind::power;
  throw std::invalid_argument("unknown estimator '" + std::string(s) + "'");
}

SpectralEstimate batch_norm_sq(const DenseMatrix& A, const Partition& P, std::size_t i,
                               const EstimatorConfig& est) {
  RowView view(A, P.batch(i));
  switch (est.kind) {
    case EstimatorKind::exact:
      return gram_spectral_norm_converged(view);
    case EstimatorKind::max_norm: {
      SpectralEstimate e;
      e.method = SpectralMethod::max_norm;
      for (std::size_t k = 0; k < view.size(); ++k)
        e.value = std::max(e.value, dot(view.row(k), view.row(k)));
      return e;
    }
    case EstimatorKind::power:
      return gram_spectral_norm_power(view, est.pm_epsilon, P.batch_size(),
                                      substream_seed(est.seed, i));
  }
  throw std::logic_error("batch_norm_sq: bad estimator");
}

double LipschitzTable::norm_sq_sum() const {
  double s = 0.0;
  for (double v : batch_norms_sq) s += v;
  return s;
}

LipschitzTable lipschitz_ls(const DenseMatrix& A, const Partition& P, const EstimatorConfig& est) {
  LipschitzTable t;
  estimate_batches(A, P, est, t);
  const double scale = static_cast<double>(P.n()) / static_cast<double>(P.batch_size());
  t.values.resize(P.count());
  for (std::size_t i = 0; i < P.count(); ++i) t.values[i] = scale * t.batch_norms_sq[i];
  set_mean(t);
  return t;
}

LipschitzTable lipschitz_hinge(const DenseMatrix& A_signed, const Partition& P, double lambda,
                               const EstimatorConfig& est) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lipschitz_hinge: lambda must be > 0");
  LipschitzTable t;
  estimate_batches(A_signed, P, est, t);
  t.lambda = lambda;
  const double root_b = std::sqrt(static_cast<double>(P.batch_size()));
  t.values.resize(P.count());
  for (std::size_t i = 0; i < P.count(); ++i)
    t.values[i] = std::sqrt(t.batch_norms_sq[i]) / root_b + lambda;
  set_mean(t);
  return t;
}

WeightTable weights_uniform(std::size_t d) {
  if (d == 0) throw std::invalid_argument("weights_uniform: no batches");
  return finish(Vector(d, 1.0 / static_cast<double>(d)), WeightMode::uniform);
}

WeightTable weights_smooth(const LipschitzTable& L) {
  const std::size_t d = L.count();
  if (d == 0) throw std::invalid_argument("weights_smooth: empty table");
  if (!(L.mean > 0.0)) return uniform_fallback(d, "weights_smooth");
  const double dd = static_cast<double>(d);
  Vector p(d);
  for (std::size_t i = 0; i < d; ++i) p[i] = 1.0 / (2.0 * dd) + L.values[i] / (2.0 * dd * L.mean);
  return finish(std::move(p), WeightMode::smooth_weighted);
}

WeightTable weights_nonsmooth(const LipschitzTable& G) {
  const std::size_t d = G.count();
  if (d == 0) throw std::invalid_argument("weights_nonsmooth: empty table");
  double total = 0.0;
  for (double v : G.values) total += v;
  if (!(total > 0.0)) return uniform_fallback(d, "weights_nonsmooth");
  Vector p(d);
  for (std::size_t i = 0; i < d; ++i) p[i] = G.values[i] / total;
  return finish(std::move(p), WeightMode::nonsmooth_weighted);
}

std::size_t sample(const WeightTable& W, Rng& rng) {
  // 53 random bits -> u uniform on [0, 1).
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const auto it = std::upper_bound(W.cumulative.begin(), W.cumulative.end(), u);
  return static_cast<std::size_t>(it - W.cumulative.begin());
}

void write_weights_csv(std::ostream& os, const LipschitzTable& L, const WeightTable& W) {
  os << "batch_index,value,probability\n";
  for (std::size_t i = 0; i < W.count(); ++i)
    os << i << ',' << format_real(L.values[i]) << ',' << format_real(W.probabilities[i]) << '\n';
}

}  // namespace wbsgd
