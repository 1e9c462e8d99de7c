#pragma once

#include <cstdint>
#include <map>

#include "sensel/ekf.hpp"

namespace sensel {

using LevelId = int;

/// Per-level axis half-widths k^(l) and the confidence p they are enforced at.
/// Higher level ids are componentwise tighter (non-increasing k).
struct ServiceLevelTable {
  std::map<LevelId, Vector> levels;
  double confidence = 0.95;

  const Vector& bounds(LevelId level) const;
};

/// Throws InvalidInput on non-positive bounds, dimension disagreement between
/// levels, loosening bounds with increasing level, or p outside (0, 1).
void validate_level_table(const ServiceLevelTable& table, Eigen::Index n_x);

/// Smallest axis-aligned box around the posterior confidence ellipsoid.
struct CertifiedBound {
  Vector k_star;
  double total_cost = 0.0;
  bool feasible = false;
  GaussianBelief posterior;
};

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

/// Chi-square CDF with `dof` degrees of freedom.
double chi2_cdf(double x, int dof);

/// alpha such that chi2_cdf(alpha, dof) = p. Bisection on the CDF; results are
/// memoized per (p, dof).
double chi2_quantile(double p, int dof);

/// alpha(p) / k_i^2 per axis; the lower bound each (P^-1)_ii must meet.
Vector axis_thresholds(const Vector& k, double p, Eigen::Index n_x);

/// Element i is true iff info(i, i) >= thresholds(i).
std::vector<bool> check_necessary(const Matrix& info, const Vector& thresholds);

/// Relative slack used by check_inclusion so that a box built from the
/// covariance itself (k_i = sqrt(alpha * P_ii)) tests as included.
inline constexpr double kInclusionRelTol = 1e-12;

/// True iff alpha(p) * P_ii <= k_i^2 on every axis, i.e. the alpha(p)
/// confidence ellipsoid of `cov` lies in the box |e_i| <= k_i.
bool check_inclusion(const Matrix& cov, const Vector& k, double p);

/// k*_i = sqrt(alpha(p) * P_ii); feasible iff every deficiency entry <= 0.
CertifiedBound certify(const GaussianBelief& posterior, double p, double selected_cost,
                       const Vector& deficiency);

/// Fraction of `samples` zero-mean Gaussian draws with covariance `cov` that
/// land inside |e_i| <= k_i for every i.
double monte_carlo_coverage(const Matrix& cov, const Vector& k, std::int64_t samples,
                            std::uint64_t seed);

/// Level table from steady-state certified bounds: each level's bounds are
/// `scales[level]` times `steady_k_star`, componentwise.
ServiceLevelTable calibrate_levels(const Vector& steady_k_star,
                                   const std::map<LevelId, double>& scales, double p);

}  // namespace sensel
