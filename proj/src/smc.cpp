#include "sensel/smc.hpp"

#include <chrono>
#include <string>
#include <utility>

#include "sensel/errors.hpp"

namespace sensel::smc {
namespace {

Vector stack_measurements(const std::vector<Vector>& parts) {
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.size();
  Vector out(rows);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.segment(r, p.size()) = p;
    r += p.size();
  }
  return out;
}

}  // namespace

void validate(const MessageA& msg) {
  try {
    validate_belief(msg.prior);
    Eigen::Index rows = 0;
    for (const auto& s : msg.onboard_sensors) {
      validate_sensor(s, msg.prior.dim());
      rows += s.rows();
    }
    if (msg.onboard_measurements.size() != rows) {
      throw InvalidInput("onboard measurements have length " +
                         std::to_string(msg.onboard_measurements.size()) + ", sensors stack to " +
                         std::to_string(rows));
    }
  } catch (const InvalidInput& e) {
    throw ProtocolError(std::string("Message A: ") + e.what());
  }
}

void validate(const MessageC& msg, Eigen::Index n_x) {
  try {
    for (const auto& entry : msg.entries) {
      validate_sensor(entry.sensor, n_x);
      if (entry.measurement.size() != entry.sensor.rows()) {
        throw InvalidInput("sensor '" + entry.sensor.id + "': measurement length mismatch");
      }
    }
  } catch (const InvalidInput& e) {
    throw ProtocolError(std::string("Message C: ") + e.what());
  }
}

SelectionResult sensor_selection(const MessageA& msg_a, const MessageC& msg_c,
                                 const ServiceLevelTable& levels, Solver solver) {
  validate(msg_a);
  const auto n = msg_a.prior.dim();
  validate(msg_c, n);
  const Vector& k_level = levels.bounds(msg_a.requested_level);
  if (k_level.size() != n) {
    throw ProtocolError("service level " + std::to_string(msg_a.requested_level) +
                        " has the wrong dimension");
  }
  const double p = levels.confidence;

  std::vector<SensorModel> external;
  external.reserve(msg_c.entries.size());
  for (const auto& entry : msg_c.entries) external.push_back(entry.sensor);

  SelectionResult out;
  const Matrix prior_info = spd_inverse(msg_a.prior.cov);
  out.instance = knapsack::build_instance(prior_info, msg_a.onboard_sensors, external,
                                          axis_thresholds(k_level, p, n));

  const auto started = std::chrono::steady_clock::now();
  out.selection = solver == Solver::kGreedy ? knapsack::greedy_solve(out.instance)
                                            : knapsack::exact_solve(out.instance);
  out.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  knapsack::Selection used = out.selection;
  if (!used.satisfied) {
    std::vector<std::size_t> everything(external.size());
    for (std::size_t j = 0; j < everything.size(); ++j) everything[j] = j;
    used = knapsack::evaluate(out.instance, std::move(everything));
  }
  out.used_externals = used.chosen;

  // Canonical stacking: onboard in list order, then externals by ascending index.
  std::vector<SensorModel> fused = msg_a.onboard_sensors;
  std::vector<Vector> parts{msg_a.onboard_measurements};
  double cost = 0.0;
  for (auto j : used.chosen) {
    fused.push_back(msg_c.entries[j].sensor);
    parts.push_back(msg_c.entries[j].measurement);
    cost += msg_c.entries[j].sensor.cost;
  }
  const GaussianBelief posterior =
      fused.empty() ? msg_a.prior : update(msg_a.prior, fused, stack_measurements(parts));

  const CertifiedBound bound = certify(posterior, p, cost, used.residual_deficiency);
  out.reply.posterior = bound.posterior;
  out.reply.total_cost = bound.total_cost;
  out.reply.certified_bounds = bound.k_star;
  out.reply.feasible = bound.feasible;
  return out;
}

Session::Session(std::string id, ServiceLevelTable levels, Solver solver)
    : id_(std::move(id)), levels_(std::move(levels)), solver_(solver) {
  if (levels_.levels.empty()) throw InvalidInput("session: empty service level table");
  validate_level_table(levels_, levels_.levels.begin()->second.size());
}

SelectionResult Session::process(const MessageA& msg_a, const MessageC& msg_c) {
  if (!open_) throw ProtocolError("session '" + id_ + "' is closed");
  auto result = sensor_selection(msg_a, msg_c, levels_, solver_);
  ++steps_;
  return result;
}

std::vector<MessageB> run_session(const std::vector<Request>& stream,
                                  const ServiceLevelTable& levels, double p,
                                  Session* session_out) {
  ServiceLevelTable table = levels;
  table.confidence = p;
  Session session("session", std::move(table));
  std::vector<MessageB> replies;
  replies.reserve(stream.size());
  for (const auto& request : stream) {
    if (const auto* step = std::get_if<StepRequest>(&request)) {
      replies.push_back(session.process(step->a, step->c).reply);
    } else {
      if (!session.is_open()) throw ProtocolError("end of service after session closed");
      session.close();
    }
  }
  session.close();
  if (session_out != nullptr) *session_out = std::move(session);
  return replies;
}

}  // namespace sensel::smc
