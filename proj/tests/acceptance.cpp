// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion with
// the measured quantities. Exits 0 once every check has run; with --strict
// the exit status is 1 when any criterion fails.

#include <array>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>
#include <string>

#include "support.hpp"

namespace {

using namespace dcep;
using dcep::testing::default_config;
using dcep::testing::default_setup;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Result lines are collected and printed in criterion order at the end, since
// the training run shared by criteria 3-5 happens first.
std::array<std::string, 8> results;
int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  results[criterion] = fmt("criterion %d: %s  %s", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  if (!pass) ++failures;
}

// 1. Exact tank-mass conservation and the condenser energy balance along a
// long chain of random admissible steps.
void conservation() {
  const auto t0 = Clock::now();
  const Configuration& s = default_setup();
  const PlantParams& p = s.plant;
  const TraceSet traces = synthesize_traces(11, 7);
  std::mt19937_64 rng(101);
  PlantState x = nominal_state(p, 0.5);
  const double mass0 = x.s_twc + x.s_tww;
  double worst_balance = 0.0, worst_step_drift = 0.0;
  int random_inputs = 0;
  const int steps = 100000;
  for (int k = 0; k < steps; ++k) {
    const RlState rs = rl_state_at(x, traces, static_cast<std::size_t>(k) % traces.size());
    ControlInput u;
    if (auto r = random_feasible_input(rs, s.projection, p, rng, 200)) {
      u = *r;
      ++random_inputs;
    } else {
      u = baseline_action(rs, p, s.baseline);
    }
    const StepOutcome o = step(x, u, rs.disturbance(), rs.rho, s.projection, p);
    const double balance = std::abs(o.q_cond - (o.q_ch + p.eta1 * o.power.p_ch)) / std::max(1.0, std::abs(o.q_cond));
    worst_balance = std::max(worst_balance, balance);
    worst_step_drift =
        std::max(worst_step_drift, std::abs((o.next_state.s_twc + o.next_state.s_tww) - (x.s_twc + x.s_tww)));
    x = o.next_state;
  }
  const double drift = (x.s_twc + x.s_tww) - mass0;
  const double secs = seconds_since(t0);
  report(1, drift == 0.0 && worst_step_drift == 0.0 && worst_balance <= 1e-9 && secs < 60.0,
         fmt("%d steps (%d random admissible inputs): total mass drift %.3g kg, worst per-step drift %.3g kg, "
             "worst condenser balance error %.3g (rel), %.1fs",
             steps, random_inputs, drift, worst_step_drift, worst_balance, secs));
}

// 2. The projection beats dense Monte Carlo sampling of its feasible set.
void projection_optimality() {
  const auto t0 = Clock::now();
  const Configuration& s = default_setup();
  std::mt19937_64 rng(202);
  double worst_gap = -std::numeric_limits<double>::infinity(), worst_violation = 0.0, worst_residual = 0.0;
  int sampled_cases = 0;
  const int cases = 200;
  for (int k = 0; k < cases; ++k) {
    const dcep::testing::Situation c = dcep::testing::random_feasible_situation(s, rng);
    const StepOutcome o = step(c.x, c.u, c.w, c.price, s.projection, s.plant);
    worst_violation = std::max(worst_violation, dcep::testing::omega_violation(c, o.z, s.plant));
    worst_residual = std::max(worst_residual, o.constraint_residual);
    const double mine = dcep::testing::weighted_distance_to_target(o.z, c, s.projection);
    const double sampled = dcep::testing::monte_carlo_best_distance(c, s, 10000, rng);
    if (std::isfinite(sampled)) {
      ++sampled_cases;
      worst_gap = std::max(worst_gap, mine - sampled);
    }
  }
  const double secs = seconds_since(t0);
  report(2, worst_gap <= 1e-4 && worst_violation <= 1e-6 && worst_residual <= 1e-6 && secs < 300.0,
         fmt("%d cases x 10^4 samples (%d with feasible samples): worst (projection - best sample) distance %.3g, "
             "worst constraint violation %.3g, %.1fs",
             cases, sampled_cases, worst_gap, std::max(worst_violation, worst_residual), secs));
}

RlState random_rl_state(const PlantParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RlState x;
  x.x_p = dcep::testing::random_state(p, rng);
  x.t_oawb = 24.0 + 4.0 * unit(rng);
  x.q_l_ref = 500.0 + 4000.0 * unit(rng);
  x.rho = 0.03 + 0.15 * unit(rng);
  x.rho_bar = 0.05 + 0.08 * unit(rng);
  return x;
}

// 3. Optimizer oracles: ridge closed form, PSD feasibility, greedy vs brute force.
void optimizer_oracles(const TrainResult& trained) {
  const auto t0 = Clock::now();
  const Configuration& s = default_setup();
  const PlantParams& p = s.plant;
  std::mt19937_64 rng(303);

  // (a) Squared-norm evaluation with an inactive constraint is ridge regression.
  QuadraticQ truth = s.q_template;
  for (int l = 0; l < truth.size(); ++l) truth.theta[l] = truth.support[l].first == truth.support[l].second ? 2.0 : 0.05;
  std::vector<Transition> data;
  std::vector<ControlInput> next;
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int k = 0; k < 300; ++k) {
    Transition t;
    t.x = random_rl_state(p, rng);
    t.u = dcep::testing::random_input(p, rng);
    t.x_next = random_rl_state(p, rng);
    next.push_back(dcep::testing::random_input(p, rng));
    t.stage_cost = q_value(truth, t.x, t.u) - 0.97 * q_value(truth, t.x_next, next.back()) + noise(rng);
    data.push_back(t);
  }
  const TdSystem sys = td_system(truth, data, next, 0.97);
  double worst_ridge = 0.0, min_lambda = std::numeric_limits<double>::infinity();
  for (double alpha : {0.01, 0.1, 1.0}) {
    PsdLsProblem pr;
    pr.A = sys.A;
    pr.b = sys.b;
    pr.anchor = Eigen::VectorXd::Constant(truth.size(), 0.0);
    for (int l = 0; l < truth.size(); ++l)
      if (truth.support[l].first == truth.support[l].second) pr.anchor[l] = 1.0;
    pr.alpha = alpha;
    pr.support = truth.support;
    pr.matrix_dim = kFeatureDim;
    pr.squared_norms = true;
    const Eigen::MatrixXd H = pr.A.transpose() * pr.A + alpha * Eigen::MatrixXd::Identity(truth.size(), truth.size());
    const Eigen::VectorXd ridge = H.ldlt().solve(pr.A.transpose() * pr.b + alpha * pr.anchor);
    const PsdLsResult r = solve_psd_ls(pr);
    worst_ridge = std::max(worst_ridge, (r.theta - ridge).cwiseAbs().maxCoeff() / std::max(1.0, ridge.cwiseAbs().maxCoeff()));
    min_lambda = std::min(min_lambda, r.min_eigenvalue);
    pr.squared_norms = false;
    min_lambda = std::min(min_lambda, solve_psd_ls(pr).min_eigenvalue);
  }
  for (const IterationLog& l : trained.log) min_lambda = std::min(min_lambda, l.min_eigenvalue);

  // (b) Greedy against a 9^4 grid for each chiller count under the trained Q.
  double worst_greedy_gap = -std::numeric_limits<double>::infinity();
  int states = 0, both_infeasible = 0, mismatched_feasibility = 0;
  for (int k = 0; k < 20; ++k) {
    const RlState x = random_rl_state(p, rng);
    const GreedyResult g = greedy_action(trained.q, x, s.projection, p, s.greedy, s.baseline);
    double brute = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= p.n_ch_max; ++n) {
      const GreedyBranch branch(trained.q, x, n, s.projection, p, s.greedy);
      const auto& lo = branch.lower();
      const auto& hi = branch.upper();
      auto grid = [&](int dim, int i) { return lo[dim] + (hi[dim] - lo[dim]) * i / 8.0; };
      for (int a = 0; a < 9; ++a)
        for (int b = 0; b < 9; ++b)
          for (int c = 0; c < 9; ++c)
            for (int d = 0; d < 9; ++d) {
              const ControlInput u{n, grid(0, a), grid(1, b), grid(2, c), grid(3, d)};
              if (!input_feasible(x.x_p, u, x.disturbance(), s.projection, p).feasible) continue;
              brute = std::min(brute, q_value(trained.q, x, u));
            }
    }
    ++states;
    if (g.fallback || !std::isfinite(brute)) {
      if (g.fallback && !std::isfinite(brute)) {
        ++both_infeasible;
      } else {
        ++mismatched_feasibility;
      }
      continue;
    }
    const double mine = q_value(trained.q, x, g.u);
    worst_greedy_gap = std::max(worst_greedy_gap, (mine - brute) / std::max(1.0, std::abs(brute)));
  }
  const double secs = seconds_since(t0);
  report(3,
         worst_ridge <= 1e-6 && min_lambda >= -1e-8 && worst_greedy_gap <= 1e-3 && mismatched_feasibility == 0 &&
             secs < 300.0,
         fmt("ridge match %.3g (rel), min eigenvalue over all solves %.3g, greedy vs 9^4 x %d grid on %d states: "
             "worst relative excess %.3g (%d states without admissible inputs, %d feasibility mismatches), %.1fs",
             worst_ridge, min_lambda, p.n_ch_max, states, worst_greedy_gap, both_infeasible, mismatched_feasibility,
             secs));
}

// 4. Training sanity with the default configuration and seed.
TrainResult training_sanity(double& train_seconds) {
  const Configuration& s = default_setup();
  const TraceSet traces = synthesize_traces(1, 14);
  const auto t0 = Clock::now();
  TrainResult r = train(traces, s, s.train.seed, [&](const IterationLog& l) {
    std::printf("  iter %2d  td %10.3f  cond %9.3g  held-out %8.2f USD  rmse %6.2f%%  %5.0fs\n", l.iteration,
                l.td_norm, l.condition_number, l.heldout_cost, 100.0 * l.heldout_relative_rmse, seconds_since(t0));
    std::fflush(stdout);
  });
  train_seconds = seconds_since(t0);
  double worst_cond = 0.0;
  bool solver_failed = false;
  for (const IterationLog& l : r.log) {
    worst_cond = std::max(worst_cond, l.condition_number);
    solver_failed = solver_failed || l.solver_failed;
  }
  const bool has_six = r.log.size() > 6;
  const double td6 = has_six ? r.log[6].td_norm : NAN, td_final = r.log.back().td_norm;
  report(4, has_six && train_seconds < 1800.0 && worst_cond <= 1e6 && td_final < td6,
         fmt("n_pol %d, seed %llu: %.0fs, worst condition number %.3g, TD norm iteration 6 %.3f vs final %.3f%s",
             s.train.n_pol, static_cast<unsigned long long>(s.train.seed), train_seconds, worst_cond, td6, td_final,
             solver_failed ? " (a solver failure kept theta)" : ""));
  return r;
}

// 5. Held-out week, trained policy against the baseline.
void end_to_end(const TrainResult& trained) {
  const auto t0 = Clock::now();
  const Configuration& s = default_setup();
  const TraceSet week = synthesize_traces(2, 7);
  const PlantState x0 = nominal_state(s.plant, 0.5);
  const RunSummary bl = summarize(simulate(baseline_controller(s), x0, week, 0, week.size(), s.projection, s.plant), s.plant);
  const RunSummary rl =
      summarize(simulate(greedy_controller(trained.q, s), x0, week, 0, week.size(), s.projection, s.plant), s.plant);
  const double savings = savings_percent(bl.electricity_cost, rl.electricity_cost);
  const double secs = seconds_since(t0);
  report(5,
         rl.electricity_cost <= bl.electricity_cost && savings >= 3.0 && bl.tracking_relative_rmse <= 0.05 &&
             rl.tracking_relative_rmse <= 0.05 && secs < 600.0,
         fmt("weekly cost RL %.2f vs baseline %.2f USD (savings %.2f%%), tracking RMSE RL %.2f%% / baseline %.2f%%, "
             "chiller switches RL %d / baseline %d, %.1fs",
             rl.electricity_cost, bl.electricity_cost, savings, 100.0 * rl.tracking_relative_rmse,
             100.0 * bl.tracking_relative_rmse, rl.chiller_switches, bl.chiller_switches, secs));
}

// 6. Exploration branch frequencies.
void exploration_pmf_check() {
  const TrainConfig& c = default_setup().train;
  std::mt19937_64 rng(606);
  double worst = 0.0;
  std::string detail;
  for (int j : {0, c.warmup_iterations + 1}) {
    const auto& pmf = exploration_pmf(j, c);
    std::array<int, 3> counts{};
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) ++counts[static_cast<int>(draw_branch(pmf, rng))];
    detail += fmt("j=%d [%.4f %.4f %.4f] ", j, counts[0] / double(draws), counts[1] / double(draws),
                  counts[2] / double(draws));
    for (int b = 0; b < 3; ++b) worst = std::max(worst, std::abs(counts[b] / double(draws) - pmf[b]));
  }
  report(6, worst <= 0.02, detail + fmt("worst deviation %.4f", worst));
}

// 7. Identical seeds give byte-identical checkpoints.
void determinism() {
  const auto t0 = Clock::now();
  json j = default_config();
  j["training"]["n_pol"] = 8;
  j["training"]["t_sim"] = 144;
  const Configuration s = configuration_from_json(j);
  const TraceSet traces = synthesize_traces(1, 7);
  auto run = [&] {
    std::ostringstream out;
    write_checkpoint(out, Checkpoint{train(traces, s, 7).q, s.hash});
    return out.str();
  };
  const std::string a = run(), b = run();
  report(7, a == b && !a.empty(),
         fmt("two %d-iteration runs with seed 7: checkpoints %s (%zu bytes), %.1fs", s.train.n_pol,
             a == b ? "byte-identical" : "differ", a.size(), seconds_since(t0)));
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  conservation();
  projection_optimality();
  double train_seconds = 0.0;
  const TrainResult trained = training_sanity(train_seconds);
  optimizer_oracles(trained);
  end_to_end(trained);
  exploration_pmf_check();
  determinism();
  for (int c = 1; c <= 7; ++c) std::printf("%s\n", results[c].c_str());
  std::printf("%d of 7 criteria failed\n", failures);
  return strict && failures > 0 ? 1 : 0;
}
