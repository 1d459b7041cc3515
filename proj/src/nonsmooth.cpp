#include "wbsgd/nonsmooth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "wbsgd/kernels.hpp"

namespace wbsgd {

double m_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  return 1.0 + std::log(1.0 / std::min(alpha, 1.0 - alpha));
}

NonSmoothPlan plan_nonsmooth(const LipschitzTable& G, double lambda, double epsilon, double alpha,
                             double c_abs) {
  if (!(lambda > 0.0)) throw std::invalid_argument("plan_nonsmooth: lambda must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("plan_nonsmooth: epsilon must be > 0");
  if (!(c_abs > 0.0)) throw std::invalid_argument("plan_nonsmooth: C must be > 0");
  NonSmoothPlan plan;
  plan.alpha = alpha;
  plan.m_alpha = m_alpha(alpha);
  plan.c_abs = c_abs;
  plan.epsilon = epsilon;
  plan.mu = lambda;
  const double k = c_abs * plan.m_alpha * G.mean * G.mean / (lambda * epsilon);
  plan.predicted_iterations =
      k > 1.0 ? static_cast<std::size_t>(std::ceil(std::min(k, 1e18))) : 1;
  return plan;
}

Vector hinge_subgradient_batch(const HingeLossProblem& p, std::span<const Index> tau,
                               std::span<const double> x) {
  if (x.size() != p.A.cols()) throw std::invalid_argument("hinge_subgradient_batch: dimension");
  if (tau.empty()) throw std::invalid_argument("hinge_subgradient_batch: empty batch");
  Vector coeffs(tau.size());
  Vector g(x.size());
  kernels::serial::hinge_active_sum(p.A, p.labels, tau, x, coeffs, g);
  const double inv_b = 1.0 / static_cast<double>(tau.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = p.lambda * x[j] - inv_b * g[j];
  return g;
}

SuffixAverage::SuffixAverage(double alpha, std::span<const double> x0)
    : alpha_(alpha), x0_(x0.begin(), x0.end()), full_(x0.size(), 0.0), lagged_(x0.size(), 0.0) {
  m_alpha(alpha);  // validates
}

std::size_t SuffixAverage::lag_index(double alpha, std::size_t k) {
  const auto kept = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(k)));
  return k - std::min(kept, k);
}

void SuffixAverage::push(std::span<const double> x) {
  for (std::size_t i = 0; i < full_.size(); ++i) full_[i] += x[i];
  ++k_;
}

void SuffixAverage::push_lagged(std::span<const double> x) {
  if (j_ >= k_) throw std::logic_error("SuffixAverage: trailing sum overtook the leading sum");
  for (std::size_t i = 0; i < lagged_.size(); ++i) lagged_[i] += x[i];
  ++j_;
}

Vector SuffixAverage::mean() const {
  if (k_ == 0) return x0_;
  Vector out(full_.size());
  const double inv = 1.0 / static_cast<double>(k_ - j_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (full_[i] - lagged_[i]) * inv;
  return out;
}

NonSmoothState::NonSmoothState(Vector x0, std::size_t b)
    : x(std::move(x0)), coeffs(b), accum(x.size()) {}

void apply_nonsmooth_update(NonSmoothState& s, const HingeLossProblem& p, const Partition& P,
                            const WeightTable& W, std::size_t i) {
  const auto rows = P.sorted_batch(i);
  kernels::hinge_active_sum(p.A, p.labels, rows, s.x, s.coeffs, s.accum);
  const double k = static_cast<double>(s.iteration + 1);
  const double d = static_cast<double>(P.count());
  const double step = 1.0 / (p.lambda * k * d * W.probabilities[i]);
  const double inv_b = 1.0 / static_cast<double>(rows.size());
  for (std::size_t j = 0; j < s.x.size(); ++j)
    s.x[j] -= step * (p.lambda * s.x[j] - inv_b * s.accum[j]);
  s.last_batch = i;
  ++s.iteration;
}

void step_nonsmooth(NonSmoothState& s, const HingeLossProblem& p, const Partition& P,
                    const WeightTable& W, Rng& rng) {
  apply_nonsmooth_update(s, p, P, W, sample(W, rng));
}

RunResult run_nonsmooth(const HingeLossProblem& p, const Partition& P, const LipschitzTable& G,
                        const SolveConfig& config, double reference_objective) {
  if (P.n() != p.A.rows()) throw std::invalid_argument("run_nonsmooth: partition does not cover A");
  const std::size_t m = p.A.cols();
  const std::size_t d = P.count();
  const bool weighted = config.mode == SamplingMode::weighted;
  const WeightTable W = weighted ? weights_nonsmooth(G) : weights_uniform(d);
  const NonSmoothPlan plan =
      plan_nonsmooth(G, p.lambda, config.epsilon, config.alpha, config.c_abs);

  RunResult out;
  out.step = 1.0 / p.lambda;
  out.predicted_iterations = plan.predicted_iterations;
  // predicted_iterations carries an unknown absolute constant, so it is
  // reported but never used to extend the budget.
  out.budget = config.max_iterations ? config.max_iterations : 50 * d;
  out.target = config.target ? *config.target : config.epsilon;

  CheckpointSchedule schedule{config.checkpoint_stride ? config.checkpoint_stride : d,
                              config.geometric_ratio};
  FlopModel flops{P.batch_size(), m, G.precompute_flops};
  const Vector x0(m, 0.0);
  NonSmoothState lead(x0, P.batch_size());
  NonSmoothState trail(x0, P.batch_size());
  Rng lead_rng(config.seed);
  Rng trail_rng(config.seed);
  SuffixAverage avg(config.alpha, x0);

  Vector xbar = avg.mean();
  auto record = [&]() {
    xbar = avg.mean();
    const double gap = objective_hinge(p, xbar) - reference_objective;
    if (!std::isfinite(gap))
      throw DivergenceError("run_nonsmooth: iterate diverged at iteration " +
                                std::to_string(lead.iteration),
                            std::move(out.trace));
    out.trace.push_back({lead.iteration, gap, flops.shared(), flops.single()});
    return gap;
  };
  record();
  std::size_t next = schedule.next(0);
  while (lead.iteration < out.budget) {
    step_nonsmooth(lead, p, P, W, lead_rng);
    flops.add_iteration();
    avg.push(lead.x);
    const std::size_t j = SuffixAverage::lag_index(config.alpha, lead.iteration);
    while (trail.iteration < j) {
      step_nonsmooth(trail, p, P, W, trail_rng);
      avg.push_lagged(trail.x);
    }
    if (lead.iteration != next && lead.iteration != out.budget) continue;
    next = schedule.next(lead.iteration);
    if (config.stop_at_target && record() <= out.target) break;
    if (!config.stop_at_target) record();
  }
  out.iterations = lead.iteration;
  out.iterations_to_target = first_reaching(out.trace, out.target);
  out.x = std::move(xbar);
  return out;
}

RunResult solve_nonsmooth(const HingeLossProblem& p, const Partition& P,
                          const SolveConfig& config) {
  const EstimatorConfig est{config.estimator, config.pm_epsilon, substream_seed(config.seed, 0x51)};
  const LipschitzTable G = lipschitz_hinge(signed_rows(p), P, p.lambda, est);
  const HingeReference ref = hinge_reference_minimizer(p);
  return run_nonsmooth(p, P, G, config, ref.objective);
}

}  // namespace wbsgd
