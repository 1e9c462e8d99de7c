#include "sensel/service_level.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <utility>

#include <Eigen/Cholesky>

#include "sensel/errors.hpp"

namespace sensel {
namespace {

constexpr int kMaxGammaIterations = 1000;
constexpr double kGammaEps = 1e-16;

// Series expansion, converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxGammaIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz), used for x >= a + 1.
double gamma_q_continued_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxGammaIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

class QuantileCache {
 public:
  double get(double p, int dof) {
    const Key key{p, dof};
    {
      std::shared_lock lock(mutex_);
      if (auto it = values_.find(key); it != values_.end()) return it->second;
    }
    const double value = compute(p, dof);
    std::unique_lock lock(mutex_);
    values_.emplace(key, value);
    return value;
  }

 private:
  using Key = std::pair<double, int>;

  static double compute(double p, int dof) {
    double lo = 0.0;
    double hi = dof + 40.0 * std::sqrt(static_cast<double>(dof));
    // Shrink until the bracket collapses to adjacent doubles or the CDF
    // matches p to well below the 1e-10 contract.
    for (int i = 0; i < 2000; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double cdf = chi2_cdf(mid, dof);
      if (cdf < p) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (hi - lo < 1e-14 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
  }

  std::shared_mutex mutex_;
  std::map<Key, double> values_;
};

QuantileCache& quantile_cache() {
  static QuantileCache cache;
  return cache;
}

}  // namespace

const Vector& ServiceLevelTable::bounds(LevelId level) const {
  auto it = levels.find(level);
  if (it == levels.end()) {
    throw ProtocolError("unknown service level " + std::to_string(level));
  }
  return it->second;
}

void validate_level_table(const ServiceLevelTable& table, Eigen::Index n_x) {
  if (!(table.confidence > 0.0 && table.confidence < 1.0)) {
    throw InvalidInput("service levels: confidence must lie in (0, 1)");
  }
  if (table.levels.empty()) {
    throw InvalidInput("service levels: table is empty");
  }
  const Vector* previous = nullptr;
  for (const auto& [id, k] : table.levels) {
    const auto name = "service level " + std::to_string(id);
    if (k.size() != n_x) {
      throw InvalidInput(name + ": expected " + std::to_string(n_x) + " bounds");
    }
    if (!k.allFinite() || (k.array() <= 0.0).any()) {
      throw InvalidInput(name + ": bounds must be finite and positive");
    }
    if (previous != nullptr && (k.array() > previous->array()).any()) {
      throw InvalidInput(name + ": bounds must not loosen as the level increases");
    }
    previous = &k;
  }
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) {
    throw InvalidInput("regularized_gamma_p: requires a > 0 and x >= 0");
  }
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_continued_fraction(a, x);
}

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw InvalidInput("chi2_cdf: dof must be >= 1");
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double p, int dof) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidInput("chi2_quantile: p must lie in (0, 1), got " + std::to_string(p));
  }
  if (dof < 1) throw InvalidInput("chi2_quantile: dof must be >= 1");
  return quantile_cache().get(p, dof);
}

Vector axis_thresholds(const Vector& k, double p, Eigen::Index n_x) {
  if (k.size() != n_x) throw InvalidInput("axis_thresholds: bound vector length mismatch");
  if ((k.array() <= 0.0).any()) throw InvalidInput("axis_thresholds: bounds must be positive");
  const double alpha = chi2_quantile(p, static_cast<int>(n_x));
  return alpha / k.array().square();
}

std::vector<bool> check_necessary(const Matrix& info, const Vector& thresholds) {
  if (info.rows() != info.cols() || info.rows() != thresholds.size()) {
    throw InvalidInput("check_necessary: dimension mismatch");
  }
  std::vector<bool> out(static_cast<std::size_t>(thresholds.size()));
  for (Eigen::Index i = 0; i < thresholds.size(); ++i) {
    out[static_cast<std::size_t>(i)] = info(i, i) >= thresholds(i);
  }
  return out;
}

bool check_inclusion(const Matrix& cov, const Vector& k, double p) {
  if (cov.rows() != cov.cols() || cov.rows() != k.size()) {
    throw InvalidInput("check_inclusion: dimension mismatch");
  }
  const double alpha = chi2_quantile(p, static_cast<int>(k.size()));
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    if (alpha * cov(i, i) > k(i) * k(i) * (1.0 + kInclusionRelTol)) return false;
  }
  return true;
}

CertifiedBound certify(const GaussianBelief& posterior, double p, double selected_cost,
                       const Vector& deficiency) {
  const auto n = posterior.dim();
  const double alpha = chi2_quantile(p, static_cast<int>(n));
  CertifiedBound out;
  out.k_star = (alpha * posterior.cov.diagonal().array()).sqrt();
  out.total_cost = selected_cost;
  out.feasible = (deficiency.array() <= 0.0).all();
  out.posterior = posterior;
  return out;
}

double monte_carlo_coverage(const Matrix& cov, const Vector& k, std::int64_t samples,
                            std::uint64_t seed) {
  if (samples < 1) throw InvalidInput("monte_carlo_coverage: samples must be >= 1");
  if (cov.rows() != cov.cols() || cov.rows() != k.size()) {
    throw InvalidInput("monte_carlo_coverage: dimension mismatch");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw InvalidInput("monte_carlo_coverage: covariance is not positive definite");
  }
  const Matrix L = llt.matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector z(k.size());
  std::int64_t inside = 0;
  for (std::int64_t s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    const Vector e = L * z;
    if ((e.array().abs() <= k.array()).all()) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(samples);
}

ServiceLevelTable calibrate_levels(const Vector& steady_k_star,
                                   const std::map<LevelId, double>& scales, double p) {
  ServiceLevelTable table;
  table.confidence = p;
  for (const auto& [id, scale] : scales) table.levels[id] = scale * steady_k_star;
  validate_level_table(table, steady_k_star.size());
  return table;
}

}  // namespace sensel
