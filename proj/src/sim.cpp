#include "sensel/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "sensel/errors.hpp"

namespace sensel::sim {

Vector VehicleState::to_vector() const {
  Vector x(kStateDim);
  x << px, py, psi, nu;
  return x;
}

VehicleState VehicleState::from_vector(const Vector& x) {
  if (x.size() != kStateDim) throw InvalidInput("vehicle state must have 4 entries");
  return {x(0), x(1), x(2), x(3)};
}

Vector ControlInput::to_vector() const {
  Vector u(kInputDim);
  u << delta, a;
  return u;
}

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(angle + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  w -= std::numbers::pi;
  return w == -std::numbers::pi ? std::numbers::pi : w;
}

VehicleState step_dynamics(const VehicleState& s, const ControlInput& u, double dt,
                           double wheelbase) {
  VehicleState out;
  out.px = s.px + s.nu * std::cos(s.psi) * dt;
  out.py = s.py + s.nu * std::sin(s.psi) * dt;
  out.psi = wrap_angle(s.psi + s.nu / wheelbase * std::tan(u.delta) * dt);
  out.nu = s.nu + u.a * dt;
  return out;
}

Matrix bicycle_jacobian(const VehicleState& s, const ControlInput& u, double dt,
                        double wheelbase) {
  Matrix F = Matrix::Identity(kStateDim, kStateDim);
  F(0, 2) = -s.nu * std::sin(s.psi) * dt;
  F(0, 3) = std::cos(s.psi) * dt;
  F(1, 2) = s.nu * std::cos(s.psi) * dt;
  F(1, 3) = std::sin(s.psi) * dt;
  F(2, 3) = std::tan(u.delta) / wheelbase * dt;
  return F;
}

ProcessModel bicycle_process_model(double dt, double wheelbase, const Matrix& process_noise) {
  ProcessModel model;
  model.input_dim = kInputDim;
  model.process_noise = process_noise;
  model.f = [dt, wheelbase](const Vector& x, const Vector& u) {
    return step_dynamics(VehicleState::from_vector(x), {u(0), u(1)}, dt, wheelbase)
        .to_vector();
  };
  model.jacobian = [dt, wheelbase](const Vector& x, const Vector& u) {
    return bicycle_jacobian(VehicleState::from_vector(x), {u(0), u(1)}, dt, wheelbase);
  };
  return model;
}

Path::Path(std::vector<Eigen::Vector2d> waypoints) : points_(std::move(waypoints)) {
  if (points_.size() < 2) throw InvalidInput("path needs at least two waypoints");
  arc_.reserve(points_.size());
  arc_.push_back(0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double seg = (points_[i] - points_[i - 1]).norm();
    if (!(seg > 0.0)) throw InvalidInput("path has repeated waypoints");
    arc_.push_back(arc_.back() + seg);
  }
}

double Path::project(const Eigen::Vector2d& p) const {
  double best_dist = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  const std::size_t last = points_.size() - 2;
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Eigen::Vector2d a = points_[i];
    const Eigen::Vector2d ab = points_[i + 1] - a;
    const double len = arc_[i + 1] - arc_[i];
    double t = (p - a).dot(ab) / (len * len);
    // End segments extend past the polyline so projections stay monotone there.
    const double lo = i == 0 ? -std::numeric_limits<double>::infinity() : 0.0;
    const double hi = i == last ? std::numeric_limits<double>::infinity() : 1.0;
    t = std::clamp(t, lo, hi);
    const double dist = (a + t * ab - p).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best_s = arc_[i] + t * len;
    }
  }
  return best_s;
}

Eigen::Vector2d Path::point_at(double s) const {
  std::size_t i;
  if (s <= 0.0) {
    i = 0;
  } else if (s >= arc_.back()) {
    i = points_.size() - 2;
  } else {
    i = static_cast<std::size_t>(std::upper_bound(arc_.begin(), arc_.end(), s) - arc_.begin()) - 1;
  }
  const double len = arc_[i + 1] - arc_[i];
  return points_[i] + (s - arc_[i]) / len * (points_[i + 1] - points_[i]);
}

Path s_curve(double length, double amplitude, double spacing) {
  if (!(length > 0.0) || !(spacing > 0.0)) throw InvalidInput("s_curve: bad geometry");
  std::vector<Eigen::Vector2d> pts;
  const auto n = static_cast<int>(std::ceil(length / spacing));
  for (int i = 0; i <= n; ++i) {
    const double x = std::min(length, i * spacing);
    pts.emplace_back(x, amplitude * std::sin(2.0 * std::numbers::pi * x / length));
    if (x >= length) break;
  }
  return Path(std::move(pts));
}

double pure_pursuit(const VehicleState& state, const Path& path, double lookahead,
                    double wheelbase, double steering_limit) {
  if (!(lookahead > 0.0)) throw InvalidInput("pure_pursuit: lookahead must be positive");
  const Eigen::Vector2d pos(state.px, state.py);
  const Eigen::Vector2d target = path.point_at(path.project(pos) + lookahead);
  const Eigen::Vector2d rel = target - pos;
  const double ld = rel.norm();
  if (ld < 1e-9) return 0.0;
  const double alpha = std::atan2(rel.y(), rel.x()) - state.psi;
  const double delta = std::atan(2.0 * wheelbase * std::sin(alpha) / ld);
  return std::clamp(delta, -steering_limit, steering_limit);
}

std::pair<double, double> pi_speed_control(double nu, double nu_ref, double integral,
                                           double dt, const PiGains& gains) {
  const double err = nu_ref - nu;
  const double a = gains.kp * err + gains.ki * integral;
  return {a, integral + err * dt};
}

Matrix psd_sqrt(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-12) {
    throw InvalidInput("psd_sqrt: matrix is not positive semidefinite");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

std::vector<Vector> synthesize_measurements(const VehicleState& truth,
                                            const std::vector<SensorModel>& sensors,
                                            std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const Vector x = truth.to_vector();
  std::vector<Vector> out;
  out.reserve(sensors.size());
  for (const auto& s : sensors) {
    Vector z(s.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    out.push_back(s.obs_matrix * x + psd_sqrt(s.noise_cov) * z);
  }
  return out;
}

}  // namespace sensel::sim
