#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sensel/ekf.hpp"
#include "sensel/service_level.hpp"
#include "sensel/sim.hpp"

namespace sensel::sim {

struct LevelChange {
  double start = 0.0;  // s
  LevelId level = 1;
};

/// Everything a simulation run depends on. Identical configs (including the
/// seed) produce bit-identical runs.
struct ScenarioConfig {
  double dt = 0.05;
  std::int64_t horizon = 400;
  double wheelbase = 3.0;
  Matrix process_noise;
  std::vector<SensorModel> onboard;
  std::vector<SensorModel> external;
  std::vector<LevelChange> level_schedule;
  ServiceLevelTable levels;
  VehicleState initial_state;
  Matrix initial_cov;
  std::vector<Eigen::Vector2d> path;
  double reference_speed = 10.0;
  PiGains gains;
  double lookahead = 6.0;
  double steering_limit = 0.7853981633974483;
  std::uint64_t seed = 1;
  /// Draw the initial estimate from N(truth, P0) instead of starting exact.
  bool sample_initial_error = true;
  /// Diagnostic: controllers act on the true state instead of the estimate.
  bool control_from_truth = false;
  double transient_time = 0.5;

  LevelId level_at(double t) const;
};

/// Config problem; `where()` is a JSON pointer or "line:column".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

/// Throws ConfigError describing the first violated constraint.
void validate(const ScenarioConfig& cfg);

ScenarioConfig parse_config(std::string_view json_text);
ScenarioConfig load_config(const std::filesystem::path& path);

enum class Mode { kOnboard, kGreedy, kExact };
const char* solver_tag(Mode mode);
std::optional<Mode> parse_mode(std::string_view name);

struct StepRecord {
  double t = 0.0;
  VehicleState truth;
  Vector estimate;
  Vector abs_error;           // |truth - estimate|, yaw difference wrapped
  LevelId level = 1;
  Vector k_requested;
  Vector k_star;
  std::vector<std::string> selected_ids;
  double cost = 0.0;
  bool feasible = false;
  Mode mode = Mode::kGreedy;
  double solve_time_us = 0.0;
  bool transient = false;
  double nees = 0.0;          // e^T P^-1 e of the posterior
  Matrix posterior_cov;
  Vector residual_deficiency;
};

/// Closed-loop run: truth propagation with process noise, controllers,
/// vehicle-side prediction, sensor management (or onboard-only update), one
/// record per step. Process, onboard, and external noise come from separate
/// seeded streams, so all modes see the same noise realisations.
std::vector<StepRecord> run_scenario(const ScenarioConfig& cfg, Mode mode);

/// Mean certified bound of an onboard-only run over its second half.
Vector steady_state_k_star(const ScenarioConfig& cfg);

/// Default level scales relative to the onboard steady-state bounds.
std::map<LevelId, double> default_level_scales();

/// Level table calibrated against the onboard-only filter (`default_level_scales`).
ServiceLevelTable calibrate_level_table(const ScenarioConfig& cfg);

}  // namespace sensel::sim
