#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sensel/ekf.hpp"

namespace sensel::knapsack {

/// Multidimensional minimum knapsack:
///   min sum_j w_j s_j  s.t.  sum_j v_ij s_j >= b_i  (i < d),  s_j in {0, 1}.
/// `values` is d x n_s (rows are resources, columns items).
struct Instance {
  Vector weights;
  Matrix values;
  Vector thresholds;

  Eigen::Index items() const { return weights.size(); }
  Eigen::Index resources() const { return thresholds.size(); }
  friend bool operator==(const Instance& a, const Instance& b) {
    return identical(a.weights, b.weights) && identical(a.values, b.values) &&
           identical(a.thresholds, b.thresholds);
  }
};

/// Throws InvalidInput on shape mismatch, negative or non-finite weights/values.
void validate(const Instance& instance);

struct Selection {
  std::vector<std::size_t> chosen;  // ascending item indices
  double total_weight = 0.0;
  Vector residual_deficiency;       // b_i - sum_{j in chosen} v_ij
  bool satisfied = false;           // all residuals <= 0

  friend bool operator==(const Selection& a, const Selection& b) {
    return a.chosen == b.chosen && a.total_weight == b.total_weight &&
           identical(a.residual_deficiency, b.residual_deficiency) &&
           a.satisfied == b.satisfied;
  }
};

/// Fills total weight, residuals, and the satisfied flag for `chosen`
/// (sorted on return). Sums run in ascending index order.
Selection evaluate(const Instance& instance, std::vector<std::size_t> chosen);

/// Floor applied to b_i in the relative deficiency max(d_i, 0) / max(b_i, eps)^2.
inline constexpr double kDeficiencyFloor = 1e-12;

/// Per-iteration snapshot from the greedy loop, for tests and diagnostics.
struct GreedyStep {
  Vector deficiency;        // d_i before this pick
  Vector efficiency;        // e_j, -inf for already-chosen items
  std::size_t picked = 0;
};

/// Deficiency-weighted greedy: repeatedly add the unchosen item with the
/// largest e_j = sum_i r_i v_ij / w_j (lowest index on ties) until every
/// deficiency is covered or no items remain. Returns the empty selection when
/// all thresholds are already non-positive.
Selection greedy_solve(const Instance& instance,
                       std::vector<GreedyStep>* trace = nullptr);

enum class ExactMode { kAuto, kExhaustive, kBranchAndBound };

/// Item count at or below which kAuto uses exhaustive enumeration.
inline constexpr Eigen::Index kExhaustiveLimit = 20;

struct ExactStats {
  std::size_t nodes = 0;
  bool budget_exhausted = false;
};

/// Minimum-weight satisfying subset; ties go to the lexicographically smallest
/// ascending index list. If even the full item set misses a threshold, returns
/// the full set with satisfied = false. `node_budget` caps branch-and-bound
/// nodes; when hit, the best incumbent so far is returned and
/// `stats->budget_exhausted` is set.
Selection exact_solve(const Instance& instance,
                      std::optional<std::size_t> node_budget = std::nullopt,
                      ExactMode mode = ExactMode::kAuto, ExactStats* stats = nullptr);

/// Initialization step of sensor selection: P_base = prior_info + onboard
/// information; b_i = thresholds_i - P_base_ii; v_ij = diag_i(C_j^T V_j^-1 C_j);
/// w_j = cost_j.
Instance build_instance(const Matrix& prior_info, std::span<const SensorModel> onboard,
                        std::span<const SensorModel> external, const Vector& thresholds);

/// Text fixture format: "d n_s", then d thresholds, then n_s lines of
/// "w_j v_1j ... v_dj". Whitespace separated; '#' starts a comment.
Instance parse_instance(std::string_view text);
std::string format_instance(const Instance& instance);

/// Raised by parse_instance; `offset()` points at the offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace sensel::knapsack
