#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "wbsgd/errors.hpp"

namespace wbsgd {

/// Multiply-add counts for one run. Each dot product or scaled vector update
/// over R^m costs m. The single-node total is the plain sum; the shared-core
/// total models b workers splitting every count evenly.
struct FlopModel {
  std::size_t b = 1;
  std::size_t m = 0;
  double precompute = 0.0;       // estimator work before the first iteration
  double dots = 0.0;             // length-m inner products so far
  double updates = 0.0;          // length-m axpy-style updates so far

  double single() const noexcept {
    return precompute + static_cast<double>(m) * (dots + updates);
  }
  double shared() const noexcept { return single() / static_cast<double>(b); }

  /// One SGD iteration: b residuals or margins, b accumulations, one step.
  void add_iteration() noexcept {
    dots += static_cast<double>(b);
    updates += static_cast<double>(b) + 1.0;
  }
};

struct TraceRecord {
  std::size_t iteration = 0;
  double value = 0.0;  // l2 error (smooth) or objective gap (non-smooth)
  double flops_shared = 0.0;
  double flops_single = 0.0;
};

enum class TraceMetric { l2_error, objective_gap };

std::string_view to_string(TraceMetric m);

/// Header "trial,iteration,<metric>,flops_shared,flops_single".
void write_trace_header(std::ostream& os, TraceMetric metric);
/// One row per record, reals with 17 significant digits.
void write_trace_rows(std::ostream& os, std::size_t trial, std::span<const TraceRecord> trace);

/// When to record a checkpoint. With geometric_ratio > 1 checkpoints follow
/// k -> max(k + 1, ceil(k * ratio)); otherwise every `stride` iterations.
/// Iteration 0 and the final iteration are always recorded.
struct CheckpointSchedule {
  std::size_t stride = 1;
  double geometric_ratio = 0.0;

  std::size_t next(std::size_t k) const;
};

/// Iterate became non-finite. Carries the checkpoints recorded so far.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<TraceRecord> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<TraceRecord>& trace() const noexcept { return trace_; }

 private:
  std::vector<TraceRecord> trace_;
};

/// First checkpoint whose value is at or below `target`.
std::optional<std::size_t> first_reaching(std::span<const TraceRecord> trace, double target);

}  // namespace wbsgd
