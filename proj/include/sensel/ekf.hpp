#pragma once

#include <cstring>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sensel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Same shape and bit-identical entries (distinguishes -0.0 from 0.0).
template <typename A, typename B>
bool identical(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double x = a(r, c);
      const double y = b(r, c);
      if (std::memcmp(&x, &y, sizeof(double)) != 0) return false;
    }
  }
  return true;
}

/// State estimate with its error covariance. Every operation in this module
/// returns a belief whose covariance is exactly symmetric and positive definite.
struct GaussianBelief {
  Vector mean;
  Matrix cov;

  Eigen::Index dim() const { return mean.size(); }
  friend bool operator==(const GaussianBelief& a, const GaussianBelief& b) {
    return identical(a.mean, b.mean) && identical(a.cov, b.cov);
  }
};

/// Discrete-time process model x+ = f(x, u) + w, w ~ N(0, Q).
struct ProcessModel {
  std::function<Vector(const Vector&, const Vector&)> f;
  std::function<Matrix(const Vector&, const Vector&)> jacobian;
  Matrix process_noise;
  Eigen::Index input_dim = 0;
};

/// One linear sensor y = C x + v, v ~ N(0, V), with a usage cost.
struct SensorModel {
  std::string id;
  Matrix obs_matrix;
  Matrix noise_cov;
  double cost = 0.0;
  bool is_onboard = false;

  Eigen::Index rows() const { return obs_matrix.rows(); }
  friend bool operator==(const SensorModel& a, const SensorModel& b) {
    return a.id == b.id && identical(a.obs_matrix, b.obs_matrix) &&
           identical(a.noise_cov, b.noise_cov) &&
           std::memcmp(&a.cost, &b.cost, sizeof(double)) == 0 && a.is_onboard == b.is_onboard;
  }
};

/// Throws InvalidInput unless the sensor is well formed for an `n_x`-state
/// system: V square, symmetric, PD; cost finite and >= 0; onboard => cost 0.
void validate_sensor(const SensorModel& sensor, Eigen::Index n_x);

/// Throws InvalidInput unless mean/cov dimensions agree and cov is symmetric PD.
void validate_belief(const GaussianBelief& belief);

/// (P + P^T) / 2.
Matrix symmetrized(const Matrix& m);

/// Inverse of a symmetric PD matrix through its Cholesky factor.
/// Throws NumericalError if the factorization fails.
Matrix spd_inverse(const Matrix& m);

/// x+ = f(x, u); P+ = F P F^T + Q.
GaussianBelief predict(const GaussianBelief& belief, const ProcessModel& model,
                       const Vector& input);

/// Joint measurement update over `sensors`, with C stacked and V block
/// diagonal in list order. `measurement` is the matching stacked vector.
/// Uses the simple form P+ = (I - K C) P followed by symmetrization.
GaussianBelief update(const GaussianBelief& belief,
                      std::span<const SensorModel> sensors,
                      const Vector& measurement);

/// C^T V^-1 C for a single sensor.
Matrix info_contribution(const SensorModel& sensor);

/// prior_info + sum_j C_j^T V_j^-1 C_j.
Matrix information_update(const Matrix& prior_info,
                          std::span<const SensorModel> sensors);

/// Stacked observation matrix and block-diagonal noise of a sensor list.
Matrix stack_obs(std::span<const SensorModel> sensors, Eigen::Index n_x);
Matrix block_noise(std::span<const SensorModel> sensors);

/// Rank of the observability matrix stacked over a window of (F_t, C_t)
/// pairs. Diagnostic only; nothing in the filter gates on it.
Eigen::Index observability_rank(std::span<const Matrix> transitions,
                                std::span<const Matrix> observations,
                                double tol = 1e-9);

}  // namespace sensel
