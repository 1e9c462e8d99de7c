#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sensel/scenario.hpp"

namespace sensel::sim {

/// CSV header row of the trace format (no trailing newline).
std::string trace_header();

/// One CSV row; floats at 17 significant digits. When `with_timing` is false
/// the solve_time_us column is written as 0 so traces are reproducible byte
/// for byte.
std::string trace_row(const StepRecord& rec, bool with_timing);

/// "# seed=<seed> mode=<tag>" comment line, header, then one row per record.
void write_trace(std::ostream& out, const std::vector<StepRecord>& records,
                 std::uint64_t seed, Mode mode, bool with_timing);

struct RunSummary {
  Vector mean_abs_error;  // non-transient steps
  Vector max_abs_error;
  double total_cost = 0.0;
  double mean_solve_us = 0.0;
  double max_solve_us = 0.0;
  std::size_t steps = 0;
  std::size_t infeasible_steps = 0;
  double mean_nees = 0.0;
};

RunSummary summarize(const std::vector<StepRecord>& records);
std::string format_summary(const RunSummary& s);

struct Comparison {
  std::size_t steps = 0;           // non-transient steps compared
  std::size_t cost_matches = 0;
  double match_rate = 0.0;
  double mean_cost_gap = 0.0;      // greedy - exact, averaged over compared steps
  double greedy_total_cost = 0.0;
  double exact_total_cost = 0.0;
  double mean_greedy_us = 0.0;
  double mean_exact_us = 0.0;
  double time_ratio = 0.0;         // mean greedy / mean exact solve time
};

/// Cost agreement uses an absolute tolerance of 1e-9.
Comparison compare_runs(const std::vector<StepRecord>& greedy,
                        const std::vector<StepRecord>& exact);

/// Pass thresholds for greedy-vs-exact comparisons.
inline constexpr double kMinCostMatchRate = 0.90;
inline constexpr double kMaxTotalCostRatio = 1.05;
inline constexpr double kMaxTimeRatio = 0.1;

bool comparison_passes(const Comparison& c);

}  // namespace sensel::sim
