#include "sensel/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "sensel/errors.hpp"

namespace sensel::sim {
namespace {

void put(std::string& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

}  // namespace

std::string trace_header() {
  std::string h = "t";
  for (const char* group : {"truth", "est", "abs_err"}) {
    for (const char* axis : {"px", "py", "psi", "nu"}) h += std::string(",") + group + "_" + axis;
  }
  h += ",level_id";
  for (const char* group : {"k_req", "k_star"}) {
    for (int i = 1; i <= 4; ++i) h += std::string(",") + group + "_" + std::to_string(i);
  }
  h += ",selected_ids,cost,feasible,solver,solve_time_us,transient";
  return h;
}

std::string trace_row(const StepRecord& rec, bool with_timing) {
  std::string row;
  put(row, rec.t);
  const Vector truth = rec.truth.to_vector();
  for (const Vector* v : {&truth, &rec.estimate, &rec.abs_error}) {
    for (Eigen::Index i = 0; i < v->size(); ++i) {
      row += ',';
      put(row, (*v)(i));
    }
  }
  row += ',' + std::to_string(rec.level);
  for (const Vector* v : {&rec.k_requested, &rec.k_star}) {
    for (Eigen::Index i = 0; i < v->size(); ++i) {
      row += ',';
      put(row, (*v)(i));
    }
  }
  row += ',';
  for (std::size_t i = 0; i < rec.selected_ids.size(); ++i) {
    if (i) row += ';';
    row += rec.selected_ids[i];
  }
  row += ',';
  put(row, rec.cost);
  row += rec.feasible ? ",1," : ",0,";
  row += solver_tag(rec.mode);
  row += ',';
  put(row, with_timing ? rec.solve_time_us : 0.0);
  row += rec.transient ? ",1" : ",0";
  return row;
}

void write_trace(std::ostream& out, const std::vector<StepRecord>& records, std::uint64_t seed,
                 Mode mode, bool with_timing) {
  out << "# seed=" << seed << " mode=" << solver_tag(mode) << '\n';
  out << trace_header() << '\n';
  for (const auto& rec : records) out << trace_row(rec, with_timing) << '\n';
}

RunSummary summarize(const std::vector<StepRecord>& records) {
  RunSummary s;
  s.mean_abs_error = Vector::Zero(kStateDim);
  s.max_abs_error = Vector::Zero(kStateDim);
  for (const auto& rec : records) {
    s.total_cost += rec.cost;
    s.mean_solve_us += rec.solve_time_us;
    s.max_solve_us = std::max(s.max_solve_us, rec.solve_time_us);
    if (!rec.feasible) ++s.infeasible_steps;
    if (rec.transient) continue;
    ++s.steps;
    s.mean_abs_error += rec.abs_error;
    s.mean_nees += rec.nees;
    s.max_abs_error = s.max_abs_error.cwiseMax(rec.abs_error);
  }
  if (s.steps > 0) {
    s.mean_abs_error /= static_cast<double>(s.steps);
    s.mean_nees /= static_cast<double>(s.steps);
  }
  if (!records.empty()) s.mean_solve_us /= static_cast<double>(records.size());
  return s;
}

std::string format_summary(const RunSummary& s) {
  std::ostringstream os;
  os.precision(6);
  const char* axes[] = {"px", "py", "psi", "nu"};
  os << "steps (non-transient): " << s.steps << '\n';
  for (int i = 0; i < 4; ++i) {
    os << "  " << axes[i] << ": mean |e| = " << s.mean_abs_error(i)
       << ", max |e| = " << s.max_abs_error(i) << '\n';
  }
  os << "total cost: " << s.total_cost << '\n';
  os << "infeasible steps: " << s.infeasible_steps << '\n';
  os << "mean NEES: " << s.mean_nees << '\n';
  os << "solver time (us): mean " << s.mean_solve_us << ", max " << s.max_solve_us << '\n';
  return os.str();
}

Comparison compare_runs(const std::vector<StepRecord>& greedy,
                        const std::vector<StepRecord>& exact) {
  if (greedy.size() != exact.size()) {
    throw InvalidInput("compare_runs: runs have different lengths");
  }
  Comparison c;
  double greedy_us = 0.0;
  double exact_us = 0.0;
  for (std::size_t i = 0; i < greedy.size(); ++i) {
    greedy_us += greedy[i].solve_time_us;
    exact_us += exact[i].solve_time_us;
    if (greedy[i].transient) continue;
    ++c.steps;
    c.greedy_total_cost += greedy[i].cost;
    c.exact_total_cost += exact[i].cost;
    c.mean_cost_gap += greedy[i].cost - exact[i].cost;
    if (std::abs(greedy[i].cost - exact[i].cost) <= 1e-9) ++c.cost_matches;
  }
  if (c.steps > 0) {
    c.match_rate = static_cast<double>(c.cost_matches) / static_cast<double>(c.steps);
    c.mean_cost_gap /= static_cast<double>(c.steps);
  }
  if (!greedy.empty()) {
    c.mean_greedy_us = greedy_us / static_cast<double>(greedy.size());
    c.mean_exact_us = exact_us / static_cast<double>(exact.size());
  }
  c.time_ratio = c.mean_exact_us > 0.0 ? c.mean_greedy_us / c.mean_exact_us : 0.0;
  return c;
}

bool comparison_passes(const Comparison& c) {
  return c.match_rate >= kMinCostMatchRate &&
         c.greedy_total_cost <= kMaxTotalCostRatio * c.exact_total_cost + 1e-9 &&
         c.time_ratio <= kMaxTimeRatio;
}

}  // namespace sensel::sim
