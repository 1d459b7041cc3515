#include "wbsgd/smooth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "wbsgd/kernels.hpp"
#include "wbsgd/linalg.hpp"

namespace wbsgd {

namespace {

constexpr std::uint64_t kTagEstimator = 0x51;
constexpr std::uint64_t kTagStepEstimator = 0x52;

std::size_t ceil_count(double v) {
  if (!(v > 1.0)) return 1;
  if (v >= 1e18) return static_cast<std::size_t>(1e18);
  return static_cast<std::size_t>(std::ceil(v));
}

void check_plan_inputs(const LeastSquaresProblem& p, const Partition& P, const LipschitzTable& L,
                       double epsilon, double epsilon0) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("plan_smooth: epsilon must be > 0");
  if (!(epsilon0 >= 0.0)) throw std::invalid_argument("plan_smooth: epsilon0 must be >= 0");
  if (P.n() != p.A.rows()) throw std::invalid_argument("plan_smooth: partition does not cover A");
  if (L.count() != P.count())
    throw std::invalid_argument("plan_smooth: Lipschitz table does not match partition");
}

double resolve_sigma_min(const LeastSquaresProblem& p, std::optional<double> sigma_min) {
  return sigma_min ? *sigma_min : smallest_singular_value(p.A);
}

}  // namespace

std::string_view to_string(SamplingMode m) {
  return m == SamplingMode::weighted ? "weighted" : "uniform";
}

SamplingMode parse_sampling_mode(std::string_view s) {
  if (s == "weighted") return SamplingMode::weighted;
  if (s == "uniform") return SamplingMode::uniform;
  throw std::invalid_argument("unknown sampling mode '" + std::string(s) + "'");
}

Vector batch_residuals_sq(const LeastSquaresProblem& p, const Partition& P,
                          std::optional<double> residual_bound) {
  Vector out(P.count(), 0.0);
  if (p.x_star) {
    const Vector ax = matvec(p.A, *p.x_star);
    for (std::size_t i = 0; i < P.count(); ++i) {
      for (Index j : P.sorted_batch(i)) {
        const double r = ax[j] - p.rhs[j];
        out[i] += r * r;
      }
    }
    return out;
  }
  if (!residual_bound)
    throw std::invalid_argument("residual estimate needs x_star or a residual bound");
  const double share = (*residual_bound) * (*residual_bound) *
                       static_cast<double>(P.batch_size()) / static_cast<double>(P.n());
  std::fill(out.begin(), out.end(), share);
  return out;
}

SmoothStepPlan plan_smooth(const LeastSquaresProblem& p, const Partition& P,
                           const LipschitzTable& L, double epsilon, double epsilon0,
                           double residual_bound_factor, std::optional<double> sigma_min,
                           std::optional<double> residual_bound) {
  check_plan_inputs(p, P, L, epsilon, epsilon0);
  const double smin = resolve_sigma_min(p, sigma_min);
  const double mu = smin * smin;
  const double d = static_cast<double>(P.count());
  const Vector rsq = batch_residuals_sq(p, P, residual_bound);
  const double f2 = residual_bound_factor * residual_bound_factor;

  double norm_sum = 0.0;
  double resid_sum = 0.0;
  for (std::size_t i = 0; i < P.count(); ++i) {
    norm_sum += L.batch_norms_sq[i];
    resid_sum += L.batch_norms_sq[i] * f2 * rsq[i];
  }
  resid_sum *= d;

  SmoothStepPlan plan;
  plan.epsilon = epsilon;
  plan.epsilon0 = epsilon0;
  plan.mu = mu;
  plan.sigma_tau_sq_bound = resid_sum;
  plan.gamma = (epsilon / 4.0) / (epsilon * norm_sum + resid_sum / mu);
  const double lg = std::log(2.0 * epsilon0 / epsilon);
  plan.predicted_iterations =
      lg > 0.0 ? ceil_count(4.0 * lg * (norm_sum / mu + resid_sum / (mu * mu * epsilon))) : 1;
  return plan;
}

SmoothStepPlan plan_smooth_uniform(const LeastSquaresProblem& p, const Partition& P,
                                   const LipschitzTable& L, double epsilon, double epsilon0,
                                   double residual_bound_factor, std::optional<double> sigma_min,
                                   std::optional<double> residual_bound) {
  check_plan_inputs(p, P, L, epsilon, epsilon0);
  const double smin = resolve_sigma_min(p, sigma_min);
  const double mu = smin * smin;
  const double d = static_cast<double>(P.count());
  const Vector rsq = batch_residuals_sq(p, P, residual_bound);
  const double f2 = residual_bound_factor * residual_bound_factor;

  double norm_max = 0.0;
  double resid_max = 0.0;
  for (std::size_t i = 0; i < P.count(); ++i) {
    norm_max = std::max(norm_max, L.batch_norms_sq[i]);
    resid_max = std::max(resid_max, L.batch_norms_sq[i] * f2 * rsq[i]);
  }
  const double sup_l = d * norm_max;
  const double resid = d * d * resid_max;

  SmoothStepPlan plan;
  plan.epsilon = epsilon;
  plan.epsilon0 = epsilon0;
  plan.mu = mu;
  plan.sigma_tau_sq_bound = resid;
  plan.gamma = (epsilon / 4.0) / (epsilon * sup_l + resid / mu);
  const double lg = std::log(2.0 * epsilon0 / epsilon);
  plan.predicted_iterations =
      lg > 0.0 ? ceil_count(2.0 * lg * (sup_l / mu + resid / (mu * mu * epsilon))) : 1;
  return plan;
}

Vector batch_gradient_ls(const LeastSquaresProblem& p, const Partition& P, std::size_t i,
                         std::span<const double> x) {
  const auto rows = P.sorted_batch(i);
  Vector residuals(rows.size());
  Vector out(p.A.cols());
  kernels::serial::residual_sum(p.A, p.rhs, rows, x, residuals, out);
  const double d = static_cast<double>(P.count());
  for (auto& v : out) v *= d;
  return out;
}

SmoothState::SmoothState(Vector x0, std::size_t b)
    : x(std::move(x0)), residuals(b), accum(x.size()) {}

void apply_smooth_update(SmoothState& s, const LeastSquaresProblem& p, const Partition& P,
                         const WeightTable& W, double gamma, std::size_t i) {
  kernels::residual_sum(p.A, p.rhs, P.sorted_batch(i), s.x, s.residuals, s.accum);
  const double c = gamma / W.probabilities[i];
  for (std::size_t j = 0; j < s.x.size(); ++j) s.x[j] -= c * s.accum[j];
  s.last_batch = i;
  ++s.iteration;
}

void step_smooth(SmoothState& s, const LeastSquaresProblem& p, const Partition& P,
                 const WeightTable& W, double gamma, Rng& rng) {
  apply_smooth_update(s, p, P, W, gamma, sample(W, rng));
}

RunResult run_smooth(const LeastSquaresProblem& p, const Partition& P, const LipschitzTable& L,
                     const SolveConfig& config, const LipschitzTable* step_table,
                     std::optional<double> sigma_min) {
  if (!p.x_star) throw std::invalid_argument("run_smooth: problem needs a reference solution");
  const std::size_t m = p.A.cols();
  const std::size_t d = P.count();
  const LipschitzTable& T = step_table ? *step_table : L;

  Vector x0(m, 0.0);
  const double eps0 = config.epsilon0 ? *config.epsilon0 : [&] {
    const double e = error_ls(p, x0);
    return e * e;
  }();
  if (!sigma_min) sigma_min = smallest_singular_value(p.A);

  const bool weighted = config.mode == SamplingMode::weighted;
  const SmoothStepPlan plan =
      weighted ? plan_smooth(p, P, T, config.epsilon, eps0, config.residual_bound_factor,
                             sigma_min, config.residual_bound)
               : plan_smooth_uniform(p, P, T, config.epsilon, eps0, config.residual_bound_factor,
                                     sigma_min, config.residual_bound);
  const WeightTable W = weighted ? weights_smooth(L) : weights_uniform(d);

  RunResult out;
  out.step = plan.gamma;
  out.predicted_iterations = plan.predicted_iterations;
  const std::size_t base = config.max_iterations ? config.max_iterations : 50 * d;
  out.budget = std::max(base, std::min(plan.predicted_iterations, config.iteration_cap));
  out.target = config.target ? *config.target : std::sqrt(config.epsilon);

  CheckpointSchedule schedule{config.checkpoint_stride ? config.checkpoint_stride : d,
                              config.geometric_ratio};
  FlopModel flops{P.batch_size(), m, L.precompute_flops};
  Rng rng(config.seed);
  SmoothState s(std::move(x0), P.batch_size());

  auto record = [&](double err) {
    out.trace.push_back({s.iteration, err, flops.shared(), flops.single()});
  };
  record(error_ls(p, s.x));
  std::size_t next = schedule.next(0);
  while (s.iteration < out.budget) {
    step_smooth(s, p, P, W, plan.gamma, rng);
    flops.add_iteration();
    if (s.iteration != next && s.iteration != out.budget) continue;
    next = schedule.next(s.iteration);
    const double err = error_ls(p, s.x);
    if (!std::isfinite(err))
      throw DivergenceError("run_smooth: iterate diverged at iteration " +
                                std::to_string(s.iteration),
                            std::move(out.trace));
    record(err);
    if (config.stop_at_target && err <= out.target) break;
  }
  out.iterations = s.iteration;
  out.iterations_to_target = first_reaching(out.trace, out.target);
  out.x = std::move(s.x);
  return out;
}

RunResult solve_smooth(const LeastSquaresProblem& p, const Partition& P,
                       const SolveConfig& config) {
  const EstimatorConfig est{config.estimator, config.pm_epsilon,
                            substream_seed(config.seed, kTagEstimator)};
  const LipschitzTable L = lipschitz_ls(p.A, P, est);
  if (config.step_estimator && *config.step_estimator != config.estimator) {
    const EstimatorConfig step_est{*config.step_estimator, config.pm_epsilon,
                                   substream_seed(config.seed, kTagStepEstimator)};
    const LipschitzTable T = lipschitz_ls(p.A, P, step_est);
    return run_smooth(p, P, L, config, &T);
  }
  return run_smooth(p, P, L, config);
}

namespace {

Vector exact_norms(const DenseMatrix& A, const Partition& P, const LipschitzTable& L) {
  if (L.estimator.kind == EstimatorKind::exact && L.batch_norms_sq.size() == P.count())
    return L.batch_norms_sq;
  Vector out(P.count());
  for (std::size_t i = 0; i < P.count(); ++i)
    out[i] = batch_norm_sq(A, P, i, EstimatorConfig{}).value;
  return out;
}

}  // namespace

double speedup_ratio(const LeastSquaresProblem& p, const Partition& P, const LipschitzTable& L) {
  const Vector norms = exact_norms(p.A, P, L);
  double sum = 0.0;
  for (double v : norms) sum += v;
  if (!(sum > 0.0)) return 1.0;
  return frobenius_sq(p.A) / sum;
}

double speedup_ratio_general(const LeastSquaresProblem& p, const Partition& P,
                             const LipschitzTable& L, double epsilon,
                             std::optional<double> sigma_min) {
  if (!p.x_star) throw std::invalid_argument("speedup_ratio_general: needs x_star");
  const Vector norms = exact_norms(p.A, P, L);
  const double smin = resolve_sigma_min(p, sigma_min);
  const double inv_mu = 1.0 / (smin * smin);
  const double n = static_cast<double>(P.n());
  const double d = static_cast<double>(P.count());

  const Vector ax = matvec(p.A, *p.x_star);
  const Vector rn = row_norms_sq(p.A);
  double fro = 0.0;
  double row_resid = 0.0;
  for (std::size_t i = 0; i < rn.size(); ++i) {
    const double r = ax[i] - p.rhs[i];
    fro += rn[i];
    row_resid += rn[i] * r * r;
  }
  const Vector rsq = batch_residuals_sq(p, P);
  double norm_sum = 0.0;
  double batch_resid = 0.0;
  for (std::size_t i = 0; i < P.count(); ++i) {
    norm_sum += norms[i];
    batch_resid += norms[i] * rsq[i];
  }
  const double num = epsilon * fro + n * inv_mu * row_resid;
  const double den = epsilon * norm_sum + d * inv_mu * batch_resid;
  if (!(den > 0.0)) return 1.0;
  return num / den;
}

}  // namespace wbsgd
