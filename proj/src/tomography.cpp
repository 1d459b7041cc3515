#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "wbsgd/errors.hpp"
#include "wbsgd/linalg.hpp"
#include "wbsgd/problems.hpp"
#include "wbsgd/rng.hpp"

namespace wbsgd {

namespace {

constexpr double kMinSegment = 1e-12;

// Clips the parametric line to [0,N] along one axis. Returns false on a miss.
bool clip_axis(double o, double d, double n, double& tmin, double& tmax) {
  if (d == 0.0) return o >= 0.0 && o <= n;
  double t1 = (0.0 - o) / d;
  double t2 = (n - o) / d;
  if (t1 > t2) std::swap(t1, t2);
  tmin = std::max(tmin, t1);
  tmax = std::min(tmax, t2);
  return true;
}

}  // namespace

// Siddon-style traversal: the breakpoints are where the line crosses grid
// lines; each segment between consecutive breakpoints lies in one cell.
std::vector<CellHit> trace_line(std::size_t grid_n, double ox, double oy, double dx, double dy) {
  const double len = std::hypot(dx, dy);
  if (len == 0.0) throw std::invalid_argument("trace_line: zero direction");
  dx /= len;
  dy /= len;
  const double n = static_cast<double>(grid_n);

  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  if (!clip_axis(ox, dx, n, tmin, tmax) || !clip_axis(oy, dy, n, tmin, tmax)) return {};
  if (!(tmax - tmin > kMinSegment)) return {};

  std::vector<double> ts{tmin, tmax};
  for (std::size_t i = 1; i < grid_n; ++i) {
    const double g = static_cast<double>(i);
    if (dx != 0.0) {
      const double t = (g - ox) / dx;
      if (t > tmin && t < tmax) ts.push_back(t);
    }
    if (dy != 0.0) {
      const double t = (g - oy) / dy;
      if (t > tmin && t < tmax) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());

  std::vector<CellHit> hits;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double seg = ts[k + 1] - ts[k];
    if (seg <= kMinSegment) continue;
    const double tm = 0.5 * (ts[k] + ts[k + 1]);
    const auto cell_of = [&](double c) {
      return std::min(grid_n - 1, static_cast<std::size_t>(std::max(0.0, std::floor(c))));
    };
    const std::size_t ix = cell_of(ox + tm * dx);
    const std::size_t iy = cell_of(oy + tm * dy);
    hits.push_back({iy * grid_n + ix, seg});
  }
  return hits;
}

LeastSquaresProblem generate_tomography(std::size_t grid_n, std::size_t oversample,
                                        std::uint64_t seed, std::size_t lines) {
  if (grid_n < 2) throw std::invalid_argument("generate_tomography: grid_n must be >= 2");
  if (oversample < 1) throw std::invalid_argument("generate_tomography: oversample must be >= 1");
  const std::size_t cells = grid_n * grid_n;
  const std::size_t rows = lines > 0 ? lines : oversample * cells;
  const double n = static_cast<double>(grid_n);
  const double radius = n / std::numbers::sqrt2;

  constexpr int kAttempts = 10;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
    Rng rng = make_rng(s, 1);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::uniform_real_distribution<double> offset(-radius, radius);
    std::vector<double> data(rows * cells, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<CellHit> hits;
      while (hits.empty()) {
        const double theta = angle(rng);
        const double off = offset(rng);
        const double dx = std::cos(theta), dy = std::sin(theta);
        hits = trace_line(grid_n, 0.5 * n - off * dy, 0.5 * n + off * dx, dx, dy);
      }
      for (const auto& h : hits) data[r * cells + h.cell] += h.length;
    }

    LeastSquaresProblem p;
    p.A = DenseMatrix(rows, cells, std::move(data));
    Rng prng = make_rng(s, 2);
    std::uniform_real_distribution<double> phantom(0.0, 1.0);
    p.x_true = Vector(cells);
    for (auto& v : *p.x_true) v = phantom(prng);
    p.rhs = matvec(p.A, *p.x_true);
    try {
      solve_reference(p);
      return p;
    } catch (const RankDeficientError&) {
      continue;
    }
  }
  throw RankDeficientError("generate_tomography: rank deficient after " +
                           std::to_string(kAttempts) + " attempts");
}

}  // namespace wbsgd
