#include "cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sensel/errors.hpp"
#include "sensel/knapsack.hpp"
#include "sensel/scenario.hpp"
#include "sensel/trace.hpp"
#include "sensel/wire.hpp"

namespace sensel::cli {
namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

sim::ScenarioConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  const std::string text = read_file(path);
  sim::ScenarioConfig cfg;
  try {
    cfg = sim::parse_config(text);
  } catch (const sim::ConfigError& e) {
    throw InputError(path + ": " + e.what());
  } catch (const std::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (seed) cfg.seed = *seed;
  return cfg;
}

int cmd_run(const std::string& config, const std::string& mode_name, const std::string& trace,
            std::optional<std::uint64_t> seed, bool timing, std::ostream& out) {
  const auto mode = sim::parse_mode(mode_name);
  if (!mode) throw InputError("unknown mode '" + mode_name + "'");
  const auto cfg = load(config, seed);
  const auto records = sim::run_scenario(cfg, *mode);
  if (!trace.empty()) {
    std::ofstream f(trace, std::ios::binary);
    if (!f) throw IoError("cannot write " + trace);
    sim::write_trace(f, records, cfg.seed, *mode, timing);
    if (!f.flush()) throw IoError("write failed: " + trace);
  }
  out << "mode: " << sim::solver_tag(*mode) << ", seed: " << cfg.seed << '\n';
  out << sim::format_summary(sim::summarize(records));
  return kExitOk;
}

int cmd_compare(const std::string& config, std::optional<std::uint64_t> seed,
                std::ostream& out) {
  const auto cfg = load(config, seed);
  const auto greedy = sim::run_scenario(cfg, sim::Mode::kGreedy);
  const auto exact = sim::run_scenario(cfg, sim::Mode::kExact);
  const auto c = sim::compare_runs(greedy, exact);
  out << std::setprecision(6);
  out << "steps compared: " << c.steps << '\n';
  out << "cost match rate: " << c.match_rate << " (" << c.cost_matches << "/" << c.steps
      << ")\n";
  out << "mean cost gap: " << c.mean_cost_gap << '\n';
  out << "total cost: greedy " << c.greedy_total_cost << ", exact " << c.exact_total_cost
      << '\n';
  out << "mean solve time (us): greedy " << c.mean_greedy_us << ", exact " << c.mean_exact_us
      << '\n';
  out << "solver time ratio (greedy/exact): " << c.time_ratio << '\n';
  const bool ok = sim::comparison_passes(c);
  out << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kExitOk : kExitFailed;
}

int cmd_knapsack(const std::string& file, const std::string& solver, std::ostream& out) {
  const std::string text = read_file(file);
  knapsack::Instance inst;
  try {
    inst = knapsack::parse_instance(text);
  } catch (const knapsack::ParseError& e) {
    throw InputError(file + ": " + e.what());
  }
  knapsack::Selection sel;
  if (solver == "greedy") {
    sel = knapsack::greedy_solve(inst);
  } else if (solver == "exact") {
    sel = knapsack::exact_solve(inst);
  } else {
    throw InputError("unknown solver '" + solver + "'");
  }
  out << std::setprecision(17);
  out << "chosen:";
  for (auto j : sel.chosen) out << ' ' << j;
  out << "\ntotal_weight: " << sel.total_weight << "\nresidual:";
  for (Eigen::Index i = 0; i < sel.residual_deficiency.size(); ++i) {
    out << ' ' << sel.residual_deficiency(i);
  }
  out << "\nsatisfied: " << (sel.satisfied ? "true" : "false") << '\n';
  return kExitOk;
}

int cmd_calibrate(const std::string& config, std::ostream& out) {
  const auto cfg = load(config, std::nullopt);
  const Vector steady = sim::steady_state_k_star(cfg);
  const auto table =
      calibrate_levels(steady, sim::default_level_scales(), cfg.levels.confidence);
  nlohmann::json levels = nlohmann::json::object();
  for (const auto& [id, k] : table.levels) {
    levels[std::to_string(id)] = std::vector<double>(k.data(), k.data() + k.size());
  }
  out << std::setprecision(17);
  out << "steady-state k*:";
  for (Eigen::Index i = 0; i < steady.size(); ++i) out << ' ' << steady(i);
  out << '\n' << nlohmann::json{{"confidence", table.confidence}, {"levels", levels}}.dump(2)
      << '\n';
  return kExitOk;
}

int cmd_serve(const std::string& config, int port, const std::string& solver,
              std::size_t sessions, std::ostream& out) {
  const auto cfg = load(config, std::nullopt);
  if (port < 0 || port > 65535) throw InputError("port out of range");
  smc::Solver s;
  if (solver == "greedy") {
    s = smc::Solver::kGreedy;
  } else if (solver == "exact") {
    s = smc::Solver::kExact;
  } else {
    throw InputError("unknown solver '" + solver + "'");
  }
  wire::serve_tcp(static_cast<std::uint16_t>(port), cfg.levels, s, sessions,
                  [&out](std::uint16_t p) { out << "listening on 127.0.0.1:" << p << std::endl; });
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cost-aware external sensor selection for vehicle state estimation"};
  app.require_subcommand(1);

  std::string config;
  std::string mode = "greedy";
  std::string trace;
  std::optional<std::uint64_t> seed;
  bool timing = false;
  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario and write a CSV trace");
  run_cmd->add_option("config", config, "Scenario config (JSON)")->required();
  run_cmd->add_option("--mode", mode, "onboard | greedy | exact")
      ->check(CLI::IsMember({"onboard", "greedy", "exact"}));
  run_cmd->add_option("--out", trace, "Trace output path");
  run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_flag("--record-timing", timing,
                    "Write measured solver times into the trace (not reproducible)");

  auto* cmp_cmd = app.add_subcommand("compare", "Run greedy and exact selection and compare");
  cmp_cmd->add_option("config", config, "Scenario config (JSON)")->required();
  cmp_cmd->add_option("--seed", seed, "Override the config seed");

  std::string instance;
  std::string solver = "greedy";
  auto* ks_cmd = app.add_subcommand("knapsack", "Solve a knapsack instance file");
  ks_cmd->add_option("instance", instance, "Instance file")->required();
  ks_cmd->add_option("--solver", solver, "greedy | exact")
      ->check(CLI::IsMember({"greedy", "exact"}));

  auto* cal_cmd = app.add_subcommand("calibrate", "Derive a level table from the onboard filter");
  cal_cmd->add_option("config", config, "Scenario config (JSON)")->required();

  int port = 0;
  std::size_t sessions = 0;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the SMC wire protocol over TCP");
  serve_cmd->add_option("config", config, "Scenario config supplying the level table")
      ->required();
  serve_cmd->add_option("--listen", port, "TCP port on 127.0.0.1 (0 = ephemeral)")->required();
  serve_cmd->add_option("--solver", solver, "greedy | exact")
      ->check(CLI::IsMember({"greedy", "exact"}));
  serve_cmd->add_option("--sessions", sessions, "Exit after this many sessions (0 = never)");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (*run_cmd) return cmd_run(config, mode, trace, seed, timing, out);
    if (*cmp_cmd) return cmd_compare(config, seed, out);
    if (*ks_cmd) return cmd_knapsack(instance, solver, out);
    if (*cal_cmd) return cmd_calibrate(config, out);
    if (*serve_cmd) return cmd_serve(config, port, solver, sessions, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailed;
  }
  return kExitBadInput;
}

}  // namespace sensel::cli
