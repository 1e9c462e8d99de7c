#include "sensel/ekf.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "sensel/errors.hpp"

namespace sensel {
namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

bool is_symmetric(const Matrix& m, double tol) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

bool is_positive_definite(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix spd_inverse(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization failed on " + dims(m) + " matrix");
  }
  return symmetrized(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

void validate_sensor(const SensorModel& sensor, Eigen::Index n_x) {
  const auto& id = sensor.id;
  if (sensor.obs_matrix.cols() != n_x || sensor.obs_matrix.rows() == 0) {
    throw InvalidInput("sensor '" + id + "': obs_matrix is " + dims(sensor.obs_matrix) +
                       ", expected k x " + std::to_string(n_x));
  }
  if (sensor.noise_cov.rows() != sensor.obs_matrix.rows() ||
      sensor.noise_cov.cols() != sensor.obs_matrix.rows()) {
    throw InvalidInput("sensor '" + id + "': noise_cov is " + dims(sensor.noise_cov) +
                       ", expected " + std::to_string(sensor.obs_matrix.rows()) + " square");
  }
  if (!sensor.obs_matrix.allFinite() || !sensor.noise_cov.allFinite()) {
    throw InvalidInput("sensor '" + id + "': non-finite entries");
  }
  const double scale = std::max(1.0, sensor.noise_cov.cwiseAbs().maxCoeff());
  if (!is_symmetric(sensor.noise_cov, 1e-12 * scale) ||
      !is_positive_definite(sensor.noise_cov)) {
    throw InvalidInput("sensor '" + id + "': noise_cov must be symmetric positive definite");
  }
  if (!std::isfinite(sensor.cost) || sensor.cost < 0.0) {
    throw InvalidInput("sensor '" + id + "': cost must be finite and nonnegative");
  }
  if (sensor.is_onboard && sensor.cost != 0.0) {
    throw InvalidInput("sensor '" + id + "': onboard sensors have zero cost");
  }
}

void validate_belief(const GaussianBelief& belief) {
  const auto n = belief.mean.size();
  if (n == 0 || belief.cov.rows() != n || belief.cov.cols() != n) {
    throw InvalidInput("belief: mean has length " + std::to_string(n) + " but cov is " +
                       dims(belief.cov));
  }
  if (!belief.mean.allFinite() || !belief.cov.allFinite()) {
    throw InvalidInput("belief: non-finite entries");
  }
  const double scale = std::max(1.0, belief.cov.cwiseAbs().maxCoeff());
  if (!is_symmetric(belief.cov, 1e-9 * scale)) {
    throw InvalidInput("belief: covariance is not symmetric");
  }
  if (!is_positive_definite(belief.cov)) {
    throw InvalidInput("belief: covariance is not positive definite");
  }
}

GaussianBelief predict(const GaussianBelief& belief, const ProcessModel& model,
                       const Vector& input) {
  validate_belief(belief);
  const auto n = belief.dim();
  if (input.size() != model.input_dim) {
    throw InvalidInput("predict: input has length " + std::to_string(input.size()) +
                       ", model expects " + std::to_string(model.input_dim));
  }
  if (model.process_noise.rows() != n || model.process_noise.cols() != n) {
    throw InvalidInput("predict: process noise is " + dims(model.process_noise));
  }
  const Matrix F = model.jacobian(belief.mean, input);
  if (F.rows() != n || F.cols() != n) {
    throw InvalidInput("predict: jacobian is " + dims(F));
  }
  GaussianBelief out;
  out.mean = model.f(belief.mean, input);
  if (out.mean.size() != n) {
    throw InvalidInput("predict: f returned length " + std::to_string(out.mean.size()));
  }
  out.cov = symmetrized(F * belief.cov * F.transpose() + model.process_noise);
  if (!is_positive_definite(out.cov)) {
    throw NumericalError("predict: prior covariance lost positive definiteness");
  }
  return out;
}

Matrix stack_obs(std::span<const SensorModel> sensors, Eigen::Index n_x) {
  Eigen::Index rows = 0;
  for (const auto& s : sensors) rows += s.rows();
  Matrix C(rows, n_x);
  Eigen::Index r = 0;
  for (const auto& s : sensors) {
    C.middleRows(r, s.rows()) = s.obs_matrix;
    r += s.rows();
  }
  return C;
}

Matrix block_noise(std::span<const SensorModel> sensors) {
  Eigen::Index rows = 0;
  for (const auto& s : sensors) rows += s.rows();
  Matrix V = Matrix::Zero(rows, rows);
  Eigen::Index r = 0;
  for (const auto& s : sensors) {
    V.block(r, r, s.rows(), s.rows()) = s.noise_cov;
    r += s.rows();
  }
  return V;
}

GaussianBelief update(const GaussianBelief& belief,
                      std::span<const SensorModel> sensors,
                      const Vector& measurement) {
  validate_belief(belief);
  if (sensors.empty()) {
    throw InvalidInput("update: sensor list is empty");
  }
  const auto n = belief.dim();
  for (const auto& s : sensors) validate_sensor(s, n);

  const Matrix C = stack_obs(sensors, n);
  if (measurement.size() != C.rows()) {
    throw InvalidInput("update: measurement has length " + std::to_string(measurement.size()) +
                       ", sensors stack to " + std::to_string(C.rows()) + " rows");
  }
  const Matrix V = block_noise(sensors);
  const Matrix& P = belief.cov;

  const Matrix S = C * P * C.transpose() + V;
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("update: innovation covariance is not positive definite");
  }
  // K = P C^T S^-1, computed as (S^-1 C P)^T with S symmetric.
  const Matrix K = llt.solve(C * P).transpose();

  GaussianBelief out;
  out.mean = belief.mean + K * (measurement - C * belief.mean);
  out.cov = symmetrized((Matrix::Identity(n, n) - K * C) * P);
  if (!is_positive_definite(out.cov)) {
    throw NumericalError("update: posterior covariance lost positive definiteness");
  }
  return out;
}

Matrix info_contribution(const SensorModel& sensor) {
  Eigen::LLT<Matrix> llt(sensor.noise_cov);
  if (llt.info() != Eigen::Success) {
    throw InvalidInput("sensor '" + sensor.id + "': noise_cov is not positive definite");
  }
  return symmetrized(sensor.obs_matrix.transpose() * llt.solve(sensor.obs_matrix));
}

Matrix information_update(const Matrix& prior_info,
                          std::span<const SensorModel> sensors) {
  if (prior_info.rows() != prior_info.cols()) {
    throw InvalidInput("information_update: prior_info is " + dims(prior_info));
  }
  Matrix info = prior_info;
  for (const auto& s : sensors) {
    if (s.obs_matrix.cols() != prior_info.rows()) {
      throw InvalidInput("information_update: sensor '" + s.id + "' has " +
                         std::to_string(s.obs_matrix.cols()) + " columns");
    }
    info += info_contribution(s);
  }
  return symmetrized(info);
}

Eigen::Index observability_rank(std::span<const Matrix> transitions,
                                std::span<const Matrix> observations, double tol) {
  if (observations.empty()) return 0;
  if (transitions.size() + 1 < observations.size()) {
    throw InvalidInput("observability_rank: need one transition between consecutive observations");
  }
  const auto n = observations.front().cols();
  Eigen::Index rows = 0;
  for (const auto& c : observations) rows += c.rows();
  Matrix O(rows, n);
  Matrix phi = Matrix::Identity(n, n);
  Eigen::Index r = 0;
  for (std::size_t t = 0; t < observations.size(); ++t) {
    O.middleRows(r, observations[t].rows()) = observations[t] * phi;
    r += observations[t].rows();
    if (t < transitions.size()) phi = transitions[t] * phi;
  }
  Eigen::FullPivLU<Matrix> lu(O);
  lu.setThreshold(tol);
  return lu.rank();
}

}  // namespace sensel
