#include "sensel/scenario.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sensel/errors.hpp"
#include "sensel/smc.hpp"

namespace sensel::sim {
namespace {

using nlohmann::json;

std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

class Reader {
 public:
  const json& at(const json& obj, const std::string& ptr, const char* key) const {
    if (!obj.is_object()) fail(ptr, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(ptr + "/" + key, "missing required key");
    return *it;
  }

  const json* maybe(const json& obj, const char* key) const {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  double number(const json& v, const std::string& ptr) const {
    if (!v.is_number()) fail(ptr, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(ptr, "expected a finite number");
    return x;
  }

  std::int64_t integer(const json& v, const std::string& ptr) const {
    if (!v.is_number_integer()) fail(ptr, "expected an integer");
    return v.get<std::int64_t>();
  }

  bool boolean(const json& v, const std::string& ptr) const {
    if (!v.is_boolean()) fail(ptr, "expected true or false");
    return v.get<bool>();
  }

  Vector vector(const json& v, const std::string& ptr) const {
    if (!v.is_array()) fail(ptr, "expected an array of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      out(static_cast<Eigen::Index>(i)) = number(v[i], ptr + "/" + std::to_string(i));
    }
    return out;
  }

  // Accepts [[...], ...], {"diag": [...]}, or a bare number for 1x1.
  Matrix matrix(const json& v, const std::string& ptr) const {
    if (v.is_number()) return Matrix::Constant(1, 1, number(v, ptr));
    if (v.is_object()) {
      const Vector d = vector(at(v, ptr, "diag"), ptr + "/diag");
      return d.asDiagonal();
    }
    if (!v.is_array() || v.empty()) fail(ptr, "expected a matrix");
    const auto rows = static_cast<Eigen::Index>(v.size());
    Matrix out;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto rp = ptr + "/" + std::to_string(r);
      const Vector row = vector(v[static_cast<std::size_t>(r)], rp);
      if (r == 0) out.resize(rows, row.size());
      if (row.size() != out.cols() || row.size() == 0) fail(rp, "ragged or empty matrix row");
      out.row(r) = row.transpose();
    }
    return out;
  }

  SensorModel sensor(const json& v, const std::string& ptr, bool onboard) const {
    SensorModel s;
    const auto& id = at(v, ptr, "id");
    if (!id.is_string()) fail(ptr + "/id", "expected a string");
    s.id = id.get<std::string>();
    s.obs_matrix = matrix(at(v, ptr, "obs_matrix"), ptr + "/obs_matrix");
    s.noise_cov = matrix(at(v, ptr, "noise_cov"), ptr + "/noise_cov");
    s.is_onboard = onboard;
    if (onboard) {
      if (const auto* c = maybe(v, "cost"); c && number(*c, ptr + "/cost") != 0.0) {
        fail(ptr + "/cost", "onboard sensors have zero cost");
      }
    } else {
      s.cost = number(at(v, ptr, "cost"), ptr + "/cost");
    }
    try {
      validate_sensor(s, kStateDim);
    } catch (const InvalidInput& e) {
      fail(ptr, e.what());
    }
    return s;
  }

  void only_keys(const json& obj, const std::string& ptr,
                 std::initializer_list<const char*> allowed) const {
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!keys.contains(it.key())) fail(ptr + "/" + it.key(), "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& ptr, const std::string& what) const {
    throw ConfigError(ptr.empty() ? "/" : ptr, what);
  }
};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

LevelId ScenarioConfig::level_at(double t) const {
  LevelId level = level_schedule.empty() ? levels.levels.begin()->first
                                         : level_schedule.front().level;
  for (const auto& change : level_schedule) {
    if (change.start <= t + 1e-9) level = change.level;
  }
  return level;
}

void validate(const ScenarioConfig& cfg) {
  Reader r;
  if (!(cfg.dt > 0.0)) r.fail("/dt", "must be positive");
  if (cfg.horizon < 0) r.fail("/horizon", "must be nonnegative");
  if (!(cfg.wheelbase > 0.0)) r.fail("/wheelbase", "must be positive");
  if (cfg.process_noise.rows() != kStateDim || cfg.process_noise.cols() != kStateDim) {
    r.fail("/process_noise", "must be 4x4");
  }
  if ((cfg.process_noise - cfg.process_noise.transpose()).cwiseAbs().maxCoeff() > 0.0) {
    r.fail("/process_noise", "must be symmetric");
  }
  try {
    (void)psd_sqrt(cfg.process_noise);
  } catch (const InvalidInput&) {
    r.fail("/process_noise", "must be positive semidefinite");
  }
  try {
    validate_belief({cfg.initial_state.to_vector(), cfg.initial_cov});
  } catch (const InvalidInput& e) {
    r.fail("/initial_cov", e.what());
  }
  try {
    validate_level_table(cfg.levels, kStateDim);
  } catch (const InvalidInput& e) {
    r.fail("/service_levels", e.what());
  }
  for (std::size_t i = 0; i < cfg.level_schedule.size(); ++i) {
    const auto ptr = "/level_schedule/" + std::to_string(i);
    if (!cfg.levels.levels.contains(cfg.level_schedule[i].level)) {
      r.fail(ptr + "/level", "unknown service level");
    }
    if (i > 0 && cfg.level_schedule[i].start < cfg.level_schedule[i - 1].start) {
      r.fail(ptr + "/start", "schedule times must be sorted");
    }
  }
  if (cfg.path.size() < 2) r.fail("/path", "needs at least two waypoints");
  if (!(cfg.lookahead > 0.0)) r.fail("/controller/lookahead", "must be positive");
  if (!(cfg.steering_limit > 0.0)) r.fail("/controller/steering_limit", "must be positive");
  if (!(cfg.transient_time >= 0.0)) r.fail("/transient_time", "must be nonnegative");
  std::set<std::string> ids;
  for (const auto* list : {&cfg.onboard, &cfg.external}) {
    for (const auto& s : *list) {
      if (!ids.insert(s.id).second) r.fail("/", "duplicate sensor id '" + s.id + "'");
    }
  }
}

ScenarioConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(line_col(text, e.byte > 0 ? e.byte - 1 : 0), "invalid JSON");
  }
  Reader r;
  if (!root.is_object()) r.fail("/", "expected a JSON object");
  r.only_keys(root, "",
              {"description", "dt", "horizon", "wheelbase", "process_noise", "onboard_sensors",
               "external_sensors", "service_levels", "level_schedule", "initial_state",
               "initial_cov", "path", "reference_speed", "controller", "seed",
               "sample_initial_error", "control_from_truth", "transient_time"});

  ScenarioConfig cfg;
  cfg.dt = r.number(r.at(root, "", "dt"), "/dt");
  cfg.horizon = r.integer(r.at(root, "", "horizon"), "/horizon");
  cfg.wheelbase = r.number(r.at(root, "", "wheelbase"), "/wheelbase");
  cfg.process_noise = r.matrix(r.at(root, "", "process_noise"), "/process_noise");

  for (const auto* key : {"onboard_sensors", "external_sensors"}) {
    const bool onboard = std::string_view(key) == "onboard_sensors";
    const auto& list = r.at(root, "", key);
    const std::string ptr = std::string("/") + key;
    if (!list.is_array()) r.fail(ptr, "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      auto s = r.sensor(list[i], ptr + "/" + std::to_string(i), onboard);
      (onboard ? cfg.onboard : cfg.external).push_back(std::move(s));
    }
  }

  const auto& state = r.vector(r.at(root, "", "initial_state"), "/initial_state");
  if (state.size() != kStateDim) r.fail("/initial_state", "expected 4 entries");
  cfg.initial_state = VehicleState::from_vector(state);
  cfg.initial_cov = r.matrix(r.at(root, "", "initial_cov"), "/initial_cov");

  const auto& path = r.at(root, "", "path");
  r.only_keys(path, "/path", {"waypoints", "s_curve"});
  if (const auto* wp = r.maybe(path, "waypoints")) {
    if (!wp->is_array()) r.fail("/path/waypoints", "expected an array of [x, y]");
    for (std::size_t i = 0; i < wp->size(); ++i) {
      const auto ptr = "/path/waypoints/" + std::to_string(i);
      const Vector p = r.vector((*wp)[i], ptr);
      if (p.size() != 2) r.fail(ptr, "expected [x, y]");
      cfg.path.emplace_back(p(0), p(1));
    }
  } else if (const auto* sc = r.maybe(path, "s_curve")) {
    r.only_keys(*sc, "/path/s_curve", {"length", "amplitude", "spacing"});
    try {
      cfg.path = s_curve(r.number(r.at(*sc, "/path/s_curve", "length"), "/path/s_curve/length"),
                         r.number(r.at(*sc, "/path/s_curve", "amplitude"),
                                  "/path/s_curve/amplitude"),
                         r.number(r.at(*sc, "/path/s_curve", "spacing"),
                                  "/path/s_curve/spacing"))
                     .waypoints();
    } catch (const InvalidInput& e) {
      r.fail("/path/s_curve", e.what());
    }
  } else {
    r.fail("/path", "expected 'waypoints' or 's_curve'");
  }
  try {
    (void)Path(cfg.path);
  } catch (const InvalidInput& e) {
    r.fail("/path", e.what());
  }

  cfg.reference_speed = r.number(r.at(root, "", "reference_speed"), "/reference_speed");
  const auto& ctl = r.at(root, "", "controller");
  r.only_keys(ctl, "/controller", {"kp", "ki", "lookahead", "steering_limit"});
  cfg.gains.kp = r.number(r.at(ctl, "/controller", "kp"), "/controller/kp");
  cfg.gains.ki = r.number(r.at(ctl, "/controller", "ki"), "/controller/ki");
  cfg.lookahead = r.number(r.at(ctl, "/controller", "lookahead"), "/controller/lookahead");
  if (const auto* lim = r.maybe(ctl, "steering_limit")) {
    cfg.steering_limit = r.number(*lim, "/controller/steering_limit");
  }

  const auto seed = r.integer(r.at(root, "", "seed"), "/seed");
  if (seed < 0) r.fail("/seed", "must be nonnegative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  if (const auto* v = r.maybe(root, "sample_initial_error")) {
    cfg.sample_initial_error = r.boolean(*v, "/sample_initial_error");
  }
  if (const auto* v = r.maybe(root, "control_from_truth")) {
    cfg.control_from_truth = r.boolean(*v, "/control_from_truth");
  }
  if (const auto* v = r.maybe(root, "transient_time")) {
    cfg.transient_time = r.number(*v, "/transient_time");
  }

  const auto& sl = r.at(root, "", "service_levels");
  r.only_keys(sl, "/service_levels", {"confidence", "levels", "calibrate", "note"});
  cfg.levels.confidence =
      r.number(r.at(sl, "/service_levels", "confidence"), "/service_levels/confidence");
  const json* explicit_levels = r.maybe(sl, "levels");
  const json* calibrate = r.maybe(sl, "calibrate");
  if ((explicit_levels == nullptr) == (calibrate == nullptr)) {
    r.fail("/service_levels", "give exactly one of 'levels' or 'calibrate'");
  }
  const json& level_obj = explicit_levels ? *explicit_levels : *calibrate;
  const std::string level_ptr = explicit_levels ? "/service_levels/levels"
                                                : "/service_levels/calibrate";
  if (!level_obj.is_object() || level_obj.empty()) r.fail(level_ptr, "expected an object");
  std::map<LevelId, double> scales;
  for (auto it = level_obj.begin(); it != level_obj.end(); ++it) {
    const auto ptr = level_ptr + "/" + it.key();
    LevelId id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(it.key(), &used);
      if (used != it.key().size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      r.fail(ptr, "level ids must be integers");
    }
    if (explicit_levels) {
      cfg.levels.levels[id] = r.vector(it.value(), ptr);
    } else {
      scales[id] = r.number(it.value(), ptr);
      if (!(scales[id] > 0.0)) r.fail(ptr, "scale must be positive");
    }
  }

  const auto& sched = r.at(root, "", "level_schedule");
  if (!sched.is_array()) r.fail("/level_schedule", "expected an array");
  for (std::size_t i = 0; i < sched.size(); ++i) {
    const auto ptr = "/level_schedule/" + std::to_string(i);
    r.only_keys(sched[i], ptr, {"start", "level"});
    cfg.level_schedule.push_back(
        {r.number(r.at(sched[i], ptr, "start"), ptr + "/start"),
         static_cast<LevelId>(r.integer(r.at(sched[i], ptr, "level"), ptr + "/level"))});
  }

  if (calibrate) {
    // Placeholder table so validation and the onboard run can proceed.
    for (const auto& [id, s] : scales) {
      cfg.levels.levels[id] = Vector::Constant(kStateDim, 1e6);
    }
    validate(cfg);
    const Vector steady = steady_state_k_star(cfg);
    try {
      cfg.levels = calibrate_levels(steady, scales, cfg.levels.confidence);
    } catch (const InvalidInput& e) {
      r.fail("/service_levels/calibrate", e.what());
    }
  }
  validate(cfg);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

const char* solver_tag(Mode mode) {
  switch (mode) {
    case Mode::kOnboard:
      return "onboard-only";
    case Mode::kGreedy:
      return "greedy";
    case Mode::kExact:
      return "exact";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view name) {
  if (name == "onboard" || name == "onboard-only") return Mode::kOnboard;
  if (name == "greedy") return Mode::kGreedy;
  if (name == "exact") return Mode::kExact;
  return std::nullopt;
}

std::vector<StepRecord> run_scenario(const ScenarioConfig& cfg, Mode mode) {
  validate(cfg);
  const Path path(cfg.path);
  const ProcessModel model = bicycle_process_model(cfg.dt, cfg.wheelbase, cfg.process_noise);
  const Matrix noise_sqrt = psd_sqrt(cfg.process_noise);

  std::mt19937_64 process_rng(stream_seed(cfg.seed, 1));
  std::mt19937_64 onboard_rng(stream_seed(cfg.seed, 2));
  std::mt19937_64 external_rng(stream_seed(cfg.seed, 3));
  std::mt19937_64 init_rng(stream_seed(cfg.seed, 4));
  std::normal_distribution<double> normal;

  VehicleState truth = cfg.initial_state;
  GaussianBelief belief{truth.to_vector(), cfg.initial_cov};
  if (cfg.sample_initial_error) {
    Vector z(kStateDim);
    for (Eigen::Index i = 0; i < kStateDim; ++i) z(i) = normal(init_rng);
    belief.mean += psd_sqrt(cfg.initial_cov) * z;
    belief.mean(2) = wrap_angle(belief.mean(2));
  }

  smc::Session session("vehicle", cfg.levels,
                       mode == Mode::kExact ? smc::Solver::kExact : smc::Solver::kGreedy);
  double integral = 0.0;

  std::vector<StepRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.horizon));
  for (std::int64_t k = 0; k < cfg.horizon; ++k) {
    const VehicleState feedback =
        cfg.control_from_truth ? truth : VehicleState::from_vector(belief.mean);
    ControlInput u;
    u.delta = pure_pursuit(feedback, path, cfg.lookahead, cfg.wheelbase, cfg.steering_limit);
    std::tie(u.a, integral) =
        pi_speed_control(feedback.nu, cfg.reference_speed, integral, cfg.dt, cfg.gains);

    Vector w(kStateDim);
    for (Eigen::Index i = 0; i < kStateDim; ++i) w(i) = normal(process_rng);
    Vector next = step_dynamics(truth, u, cfg.dt, cfg.wheelbase).to_vector() + noise_sqrt * w;
    next(2) = wrap_angle(next(2));
    truth = VehicleState::from_vector(next);

    const double t = static_cast<double>(k + 1) * cfg.dt;
    const GaussianBelief prior = predict(belief, model, u.to_vector());
    const auto onboard_y = synthesize_measurements(truth, cfg.onboard, onboard_rng);
    const auto external_y = synthesize_measurements(truth, cfg.external, external_rng);

    smc::MessageA msg_a;
    msg_a.onboard_sensors = cfg.onboard;
    Eigen::Index rows = 0;
    for (const auto& y : onboard_y) rows += y.size();
    msg_a.onboard_measurements.resize(rows);
    rows = 0;
    for (const auto& y : onboard_y) {
      msg_a.onboard_measurements.segment(rows, y.size()) = y;
      rows += y.size();
    }
    msg_a.prior = prior;
    msg_a.requested_level = cfg.level_at(t);

    smc::MessageC msg_c;
    if (mode != Mode::kOnboard) {
      for (std::size_t j = 0; j < cfg.external.size(); ++j) {
        msg_c.entries.push_back({cfg.external[j], external_y[j]});
      }
    }

    const auto result = session.process(msg_a, msg_c);
    belief = result.reply.posterior;
    belief.mean(2) = wrap_angle(belief.mean(2));

    StepRecord rec;
    rec.t = t;
    rec.truth = truth;
    rec.estimate = belief.mean;
    Vector err = truth.to_vector() - belief.mean;
    err(2) = wrap_angle(err(2));
    rec.abs_error = err.cwiseAbs();
    rec.level = msg_a.requested_level;
    rec.k_requested = cfg.levels.bounds(rec.level);
    rec.k_star = result.reply.certified_bounds;
    for (auto j : result.used_externals) rec.selected_ids.push_back(cfg.external[j].id);
    rec.cost = result.reply.total_cost;
    rec.feasible = result.reply.feasible;
    rec.mode = mode;
    rec.solve_time_us = mode == Mode::kOnboard ? 0.0 : result.solve_seconds * 1e6;
    rec.transient = t < cfg.transient_time - 1e-9;
    rec.nees = err.dot(spd_inverse(belief.cov) * err);
    rec.posterior_cov = belief.cov;
    rec.residual_deficiency = result.selection.residual_deficiency;
    records.push_back(std::move(rec));
  }
  return records;
}

Vector steady_state_k_star(const ScenarioConfig& cfg) {
  const auto records = run_scenario(cfg, Mode::kOnboard);
  if (records.size() < 2) throw InvalidInput("steady_state_k_star: horizon too short");
  Vector sum = Vector::Zero(kStateDim);
  std::size_t count = 0;
  for (std::size_t i = records.size() / 2; i < records.size(); ++i) {
    sum += records[i].k_star;
    ++count;
  }
  return sum / static_cast<double>(count);
}

std::map<LevelId, double> default_level_scales() { return {{1, 1.2}, {2, 0.55}, {3, 0.35}}; }

ServiceLevelTable calibrate_level_table(const ScenarioConfig& cfg) {
  return calibrate_levels(steady_state_k_star(cfg), default_level_scales(),
                          cfg.levels.confidence);
}

}  // namespace sensel::sim
