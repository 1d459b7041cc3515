#include "wbsgd/trace.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "wbsgd/textio.hpp"

namespace wbsgd {

std::string_view to_string(TraceMetric m) {
  return m == TraceMetric::l2_error ? "l2_error" : "objective_gap";
}

void write_trace_header(std::ostream& os, TraceMetric metric) {
  os << "trial,iteration," << to_string(metric) << ",flops_shared,flops_single\n";
}

void write_trace_rows(std::ostream& os, std::size_t trial, std::span<const TraceRecord> trace) {
  for (const auto& r : trace) {
    os << trial << ',' << r.iteration << ',' << format_real(r.value) << ','
       << format_real(r.flops_shared) << ',' << format_real(r.flops_single) << '\n';
  }
}

std::size_t CheckpointSchedule::next(std::size_t k) const {
  if (geometric_ratio > 1.0) {
    const double g = std::ceil(static_cast<double>(k) * geometric_ratio);
    return std::max(k + 1, static_cast<std::size_t>(g));
  }
  return k + std::max<std::size_t>(stride, 1);
}

std::optional<std::size_t> first_reaching(std::span<const TraceRecord> trace, double target) {
  for (const auto& r : trace)
    if (r.value <= target) return r.iteration;
  return std::nullopt;
}

}  // namespace wbsgd
