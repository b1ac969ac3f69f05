// dcep: train the RL chiller-plant policy, simulate either controller in
// closed loop and compare them on identical traces.
//
// Exit codes: 0 success, 1 runtime failure (I/O, solver, bad data), 2 usage.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dcep/dcep.hpp"

#ifndef DCEP_DEFAULT_CONFIG
#define DCEP_DEFAULT_CONFIG "config/default.json"
#endif

namespace {

using namespace dcep;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TraceSource {
  std::string path;
  std::optional<std::uint64_t> synthetic_seed;

  void add_to(CLI::App* cmd) {
    auto* t = cmd->add_option("--traces", path, "Trace CSV (timestamp,t_oawb_c,q_l_ref_kw,price_usd_per_kwh)");
    auto* s = cmd->add_option("--synthetic", synthetic_seed, "Use a synthetic trace set drawn with this seed");
    t->excludes(s);
  }

  // Synthetic sets are generated with the requested number of days.
  [[nodiscard]] TraceSet load(int days) const {
    if (synthetic_seed) return synthesize_traces(*synthetic_seed, days);
    if (path.empty()) throw UsageError("no traces given: pass --traces PATH or --synthetic SEED");
    TraceSet t = load_traces(path);
    for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
    return t;
  }
};

std::size_t horizon_for(const TraceSet& t, int days) {
  const auto want = static_cast<std::size_t>(days) * kStepsPerDay;
  if (t.size() < want) {
    std::cerr << "warning: traces hold " << t.size() << " steps; simulating all of them instead of " << want << '\n';
    return t.size();
  }
  return want;
}

Checkpoint load_policy(const std::string& path, const Configuration& s) {
  Checkpoint c = read_checkpoint(path);
  if (c.config_hash != s.hash)
    std::cerr << "warning: checkpoint " << path << " was trained under a different configuration\n";
  return c;
}

void write_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_step_csv(out, traj);
  if (!out) throw std::runtime_error("failed writing " + path);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path);
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  TraceSource traces;
  int days = 14;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string log_csv;
};

int run_train(const TrainArgs& a, const Configuration& s) {
  const TraceSet traces = a.traces.load(a.days);
  const std::uint64_t seed = a.seed.value_or(s.train.seed);
  std::ofstream log_out;
  if (!a.log_csv.empty()) {
    log_out.open(a.log_csv);
    if (!log_out) throw std::runtime_error("cannot write " + a.log_csv);
    log_out << "iteration,alpha,td_norm,condition_number,greedy,random,baseline,random_fallbacks,greedy_fallbacks,"
               "episode_cost,heldout_cost_usd,heldout_relative_rmse,solver_failed,min_eigenvalue\n";
  }
  std::printf("training on %zu steps, seed %llu, %d iterations of %d steps\n", traces.size(),
              static_cast<unsigned long long>(seed), s.train.n_pol, s.train.t_sim);
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train(traces, s, seed, [&](const IterationLog& l) {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("iter %3d  alpha %.2f  td %11.3f  cond %9.3g  mix %3d/%3d/%3d  held-out %8.2f USD rmse %6.2f%%%s  "
                "%6.0fs\n",
                l.iteration, l.alpha, l.td_norm, l.condition_number, l.branch_counts[0], l.branch_counts[1],
                l.branch_counts[2], l.heldout_cost, 100.0 * l.heldout_relative_rmse,
                l.solver_failed ? "  [solver failed, theta kept]" : "", elapsed);
    std::fflush(stdout);
    if (log_out) {
      char buf[512];
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d,%d,%d,%d,%d,%.17g,%.17g,%.17g,%d,%.17g\n", l.iteration,
                    l.alpha, l.td_norm, l.condition_number, l.branch_counts[0], l.branch_counts[1],
                    l.branch_counts[2], l.random_fallbacks, l.greedy_fallbacks, l.episode_cost, l.heldout_cost,
                    l.heldout_relative_rmse, l.solver_failed ? 1 : 0, l.min_eigenvalue);
      log_out << buf;
    }
  });
  write_checkpoint(a.out, Checkpoint{r.q, s.hash});
  std::printf("checkpoint written to %s\n", a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  TraceSource traces;
  std::string controller = "baseline";
  std::string theta;
  int days = 7;
  std::string out_csv;
  std::string report;
};

Controller make_controller(const std::string& kind, const std::string& theta, const Configuration& s, QuadraticQ& storage) {
  if (kind == "baseline") return baseline_controller(s);
  if (theta.empty()) {
    std::cerr << "note: no --theta given; the RL controller runs with theta = 0\n";
    storage = s.q_template;
  } else {
    storage = load_policy(theta, s).q;
  }
  return greedy_controller(storage, s);
}

int run_simulate(const SimulateArgs& a, const Configuration& s) {
  const TraceSet traces = a.traces.load(a.days);
  const std::size_t horizon = horizon_for(traces, a.days);
  QuadraticQ q;
  const Controller ctl = make_controller(a.controller, a.theta, s, q);
  const Trajectory traj = simulate(ctl, nominal_state(s.plant, 0.5), traces, 0, horizon, s.projection, s.plant);
  const RunSummary sum = summarize(traj, s.plant);
  std::printf("%zu steps (%.2f days)\n", sum.steps, double(sum.steps) / kStepsPerDay);
  print_summary(std::cout, a.controller, sum);
  if (!a.out_csv.empty()) write_csv(a.out_csv, traj);
  if (!a.report.empty()) {
    json j = summary_json(sum);
    j["controller"] = a.controller;
    write_json(a.report, j);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CompareArgs {
  TraceSource traces;
  std::string challenger = "rl";
  std::string theta;
  int days = 7;
  std::string out;
  std::string csv_prefix;
};

int run_compare(const CompareArgs& a, const Configuration& s) {
  if (a.challenger == "rl" && a.theta.empty()) throw UsageError("compare needs --theta CKPT for the rl controller");
  const TraceSet traces = a.traces.load(a.days);
  const std::size_t horizon = horizon_for(traces, a.days);
  const PlantState x0 = nominal_state(s.plant, 0.5);
  QuadraticQ q;
  const Controller challenger = make_controller(a.challenger, a.theta, s, q);
  const Trajectory ref = simulate(baseline_controller(s), x0, traces, 0, horizon, s.projection, s.plant);
  const Trajectory ch = simulate(challenger, x0, traces, 0, horizon, s.projection, s.plant);
  EvalReport r;
  r.reference = {"baseline", summarize(ref, s.plant)};
  r.challenger = {a.challenger, summarize(ch, s.plant)};
  if (r.challenger.name == r.reference.name) r.challenger.name += "_2";
  r.steps = horizon;
  r.days = double(horizon) / kStepsPerDay;
  print_report(std::cout, r);
  if (!a.out.empty()) write_json(a.out, report_json(r));
  if (!a.csv_prefix.empty()) {
    write_csv(a.csv_prefix + "_baseline.csv", ref);
    write_csv(a.csv_prefix + "_" + a.challenger + ".csv", ch);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"District cooling plant: RL controller training, simulation and comparison"};
  app.require_subcommand(1);
  std::string config_path = DCEP_DEFAULT_CONFIG;
  app.add_option("--config", config_path, "JSON configuration file")->capture_default_str();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Run batch policy iteration and write a checkpoint");
  ta.traces.add_to(train_cmd);
  train_cmd->add_option("--days", ta.days, "Length of a synthetic training set in days")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", ta.out, "Checkpoint path")->required();
  train_cmd->add_option("--seed", ta.seed, "Training seed (default: training.seed from the configuration)");
  train_cmd->add_option("--log-csv", ta.log_csv, "Write the per-iteration log as CSV");

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Closed-loop run of one controller");
  sa.traces.add_to(sim_cmd);
  sim_cmd->add_option("--controller", sa.controller, "rl or baseline")
      ->capture_default_str()
      ->check(CLI::IsMember({"rl", "baseline"}));
  sim_cmd->add_option("--theta", sa.theta, "Checkpoint for the rl controller (theta = 0 when omitted)");
  sim_cmd->add_option("--days", sa.days, "Horizon in days")->capture_default_str()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out-csv", sa.out_csv, "Per-step CSV output");
  sim_cmd->add_option("--report", sa.report, "JSON summary output");

  CompareArgs ca;
  auto* cmp_cmd = app.add_subcommand("compare", "Run a controller and the baseline on identical traces");
  ca.traces.add_to(cmp_cmd);
  cmp_cmd->add_option("--theta", ca.theta, "Checkpoint for the rl controller");
  cmp_cmd->add_option("--controller", ca.challenger, "Challenger: rl or baseline")
      ->capture_default_str()
      ->check(CLI::IsMember({"rl", "baseline"}));
  cmp_cmd->add_option("--days", ca.days, "Horizon in days")->capture_default_str()->check(CLI::PositiveNumber);
  cmp_cmd->add_option("--out", ca.out, "JSON report output");
  cmp_cmd->add_option("--csv-prefix", ca.csv_prefix, "Write PREFIX_baseline.csv and PREFIX_<controller>.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const Configuration s = configuration_from_json(load_json_file(config_path));
    if (train_cmd->parsed()) return run_train(ta, s);
    if (sim_cmd->parsed()) return run_simulate(sa, s);
    if (cmp_cmd->parsed()) return run_compare(ca, s);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
