#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sensel/ekf.hpp"
#include "sensel/knapsack.hpp"
#include "sensel/service_level.hpp"

namespace sensel::smc {

/// Vehicle -> SMC: onboard sensors and their stacked measurements, the
/// vehicle-side prediction, and the requested service level.
struct MessageA {
  std::vector<SensorModel> onboard_sensors;
  Vector onboard_measurements;
  GaussianBelief prior;
  LevelId requested_level = 1;

  friend bool operator==(const MessageA& a, const MessageA& b) {
    return a.onboard_sensors == b.onboard_sensors &&
           identical(a.onboard_measurements, b.onboard_measurements) && a.prior == b.prior &&
           a.requested_level == b.requested_level;
  }
};

/// Sensing agents -> SMC: one (sensor, measurement) entry per external sensor.
struct MessageC {
  struct Entry {
    SensorModel sensor;
    Vector measurement;

    friend bool operator==(const Entry& a, const Entry& b) {
      return a.sensor == b.sensor && identical(a.measurement, b.measurement);
    }
  };
  std::vector<Entry> entries;

  bool operator==(const MessageC&) const = default;
};

/// SMC -> vehicle: posterior, cost of the externals used, certified bounds.
struct MessageB {
  GaussianBelief posterior;
  double total_cost = 0.0;
  Vector certified_bounds;
  bool feasible = false;

  friend bool operator==(const MessageB& a, const MessageB& b) {
    return a.posterior == b.posterior && identical(Vector::Constant(1, a.total_cost),
                                                   Vector::Constant(1, b.total_cost)) &&
           identical(a.certified_bounds, b.certified_bounds) && a.feasible == b.feasible;
  }
};

/// Vehicle -> SMC: terminates the session.
struct EndOfService {
  bool operator==(const EndOfService&) const = default;
};

enum class Solver { kGreedy, kExact };

/// Throws ProtocolError on dimension mismatches or non-PD priors.
void validate(const MessageA& msg);
void validate(const MessageC& msg, Eigen::Index n_x);

struct SelectionResult {
  MessageB reply;
  knapsack::Instance instance;
  knapsack::Selection selection;            // solver output
  std::vector<std::size_t> used_externals;  // indices into MessageC actually fused
  double solve_seconds = 0.0;               // wall time of the knapsack solve only
};

/// One step of sensor selection: build the knapsack instance from the prior
/// information and the onboard sensors, solve it, fuse onboard plus chosen
/// externals (all externals if the solver cannot satisfy the level), and
/// certify the resulting posterior.
SelectionResult sensor_selection(const MessageA& msg_a, const MessageC& msg_c,
                                 const ServiceLevelTable& levels,
                                 Solver solver = Solver::kGreedy);

/// A sensor management session. Requests are processed in arrival order; a
/// closed session rejects further requests.
class Session {
 public:
  Session(std::string id, ServiceLevelTable levels, Solver solver = Solver::kGreedy);

  const std::string& id() const { return id_; }
  bool is_open() const { return open_; }
  std::uint64_t step_counter() const { return steps_; }
  const ServiceLevelTable& levels() const { return levels_; }

  SelectionResult process(const MessageA& msg_a, const MessageC& msg_c);
  void close() { open_ = false; }

 private:
  std::string id_;
  ServiceLevelTable levels_;
  Solver solver_;
  bool open_ = true;
  std::uint64_t steps_ = 0;
};

struct StepRequest {
  MessageA a;
  MessageC c;
};

using Request = std::variant<StepRequest, EndOfService>;

/// Drives a session over a request stream: one MessageB per StepRequest, in
/// order. The session closes at EndOfService or at the end of the stream;
/// requests after EndOfService raise ProtocolError.
std::vector<MessageB> run_session(const std::vector<Request>& stream,
                                  const ServiceLevelTable& levels, double p,
                                  Session* session_out = nullptr);

}  // namespace sensel::smc
