#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sensel/ekf.hpp"
#include "sensel/service_level.hpp"

namespace sensel::sim {

inline constexpr Eigen::Index kStateDim = 4;
inline constexpr Eigen::Index kInputDim = 2;

/// Planar kinematic bicycle state: position (m), yaw (rad), speed (m/s).
struct VehicleState {
  double px = 0.0;
  double py = 0.0;
  double psi = 0.0;
  double nu = 0.0;

  Vector to_vector() const;
  static VehicleState from_vector(const Vector& x);
  bool operator==(const VehicleState&) const = default;
};

/// Steering angle (rad) and longitudinal acceleration (m/s^2).
struct ControlInput {
  double delta = 0.0;
  double a = 0.0;

  Vector to_vector() const;
};

/// Wraps to (-pi, pi].
double wrap_angle(double angle);

/// One explicit Euler step of the kinematic bicycle, yaw wrapped. No noise.
VehicleState step_dynamics(const VehicleState& state, const ControlInput& input, double dt,
                           double wheelbase);

/// d(step_dynamics)/d(state).
Matrix bicycle_jacobian(const VehicleState& state, const ControlInput& input, double dt,
                        double wheelbase);

ProcessModel bicycle_process_model(double dt, double wheelbase, const Matrix& process_noise);

/// Waypoint polyline parameterized by arc length. Queries past either end
/// extrapolate along the first/last segment.
class Path {
 public:
  explicit Path(std::vector<Eigen::Vector2d> waypoints);

  double length() const { return arc_.back(); }
  const std::vector<Eigen::Vector2d>& waypoints() const { return points_; }

  /// Arc length of the closest point on the polyline to `p`.
  double project(const Eigen::Vector2d& p) const;
  Eigen::Vector2d point_at(double s) const;

 private:
  std::vector<Eigen::Vector2d> points_;
  std::vector<double> arc_;
};

/// Gentle single-period sine S-curve from x = 0 to x = `length`.
Path s_curve(double length, double amplitude, double spacing);

/// Geometric pure pursuit: aims at the path point `lookahead` metres of arc
/// ahead of the vehicle's projection, delta = atan(2 L sin(alpha) / l_d),
/// clamped to +-steering_limit.
double pure_pursuit(const VehicleState& state, const Path& path, double lookahead,
                    double wheelbase, double steering_limit);

struct PiGains {
  double kp = 3.0;
  double ki = 0.1;
};

/// a = kp (nu_ref - nu) + ki I, then I += (nu_ref - nu) dt.
/// Returns (a, updated integral).
std::pair<double, double> pi_speed_control(double nu, double nu_ref, double integral,
                                           double dt, const PiGains& gains);

/// Any matrix S with S S^T = m for symmetric PSD m (Cholesky when PD,
/// eigen-decomposition otherwise).
Matrix psd_sqrt(const Matrix& m);

/// y_j = C_j x + chol(V_j) z, drawing z in sensor list order.
std::vector<Vector> synthesize_measurements(const VehicleState& truth,
                                            const std::vector<SensorModel>& sensors,
                                            std::mt19937_64& rng);

}  // namespace sensel::sim
