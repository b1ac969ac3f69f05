#pragma once

// Batch, off-policy policy iteration with a quadratic Q-function.
//
// Q(x, u) = z' P_theta z with z the scaled [x, u] vector and P_theta a sparse
// symmetric matrix whose free entries are listed in the support. Each
// iteration collects one contiguous episode under an exploration mix of the
// greedy policy, uniformly random admissible inputs and the baseline, then
// refits theta by PSD-constrained, regularized least squares on the TD
// residuals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dcep/baseline.hpp"
#include "dcep/optim.hpp"
#include "dcep/params.hpp"
#include "dcep/plant.hpp"
#include "dcep/projection.hpp"
#include "dcep/rl_state.hpp"
#include "dcep/simulate.hpp"
#include "dcep/traces.hpp"

namespace dcep {

// ---------------------------------------------------------------------------
// Q-function

struct QuadraticQ {
  std::vector<IndexPair> support;  // (i, j) with i <= j over the 17-vector [x, u]
  Eigen::VectorXd theta;
  ScalingVector scaling{};
  ScalingVector offset{};  // subtracted before dividing by the scaling; zero by default

  [[nodiscard]] int size() const { return static_cast<int>(support.size()); }
  [[nodiscard]] Eigen::MatrixXd matrix() const { return assemble_symmetric(theta, support, kFeatureDim); }
};

inline std::array<double, kFeatureDim> scaled(const StateInputVector& v, const QuadraticQ& q) {
  std::array<double, kFeatureDim> z{};
  for (int i = 0; i < kFeatureDim; ++i) z[i] = (v[i] - q.offset[i]) / q.scaling[i];
  return z;
}

// Features psi with Q = theta' psi; off-diagonal entries appear twice in the quadratic form.
inline Eigen::VectorXd features(const QuadraticQ& q, const RlState& x, const ControlInput& u) {
  const auto z = scaled(stack(x, u), q);
  Eigen::VectorXd psi(q.size());
  for (int l = 0; l < q.size(); ++l) {
    const auto [i, j] = q.support[l];
    psi[l] = (i == j ? 1.0 : 2.0) * z[i] * z[j];
  }
  return psi;
}

inline double q_value(const QuadraticQ& q, const RlState& x, const ControlInput& u) {
  const auto z = scaled(stack(x, u), q);
  double v = 0.0;
  for (int l = 0; l < q.size(); ++l) {
    const auto [i, j] = q.support[l];
    v += (i == j ? 1.0 : 2.0) * q.theta[l] * z[i] * z[j];
  }
  return v;
}

inline std::vector<IndexPair> support_from_json(const json& j) {
  std::vector<IndexPair> s;
  for (const auto& entry : j) {
    if (!entry.is_array() || entry.size() != 2) throw ConfigError("support entries must be [name, name] pairs");
    int a = component_index(entry[0].get<std::string>());
    int b = component_index(entry[1].get<std::string>());
    if (a < 0 || b < 0) throw ConfigError("unknown support component in " + entry.dump());
    if (a > b) std::swap(a, b);
    if (std::find(s.begin(), s.end(), IndexPair{a, b}) != s.end())
      throw ConfigError("duplicate support entry " + entry.dump());
    s.emplace_back(a, b);
  }
  if (s.empty()) throw ConfigError("support must not be empty");
  return s;
}

// ---------------------------------------------------------------------------
// Settings

struct TrainConfig {
  double gamma = 0.97;
  double kappa = 500.0;
  double load_unit_kw = 1000.0;  // the tracking term measures load error in MW
  int t_sim = 432;
  int n_pol = 50;
  double beta = 100.0;
  double theta0_max = 0.1;
  int warmup_iterations = 5;  // iterations j <= this use the warm-up pmf
  std::array<double, 3> pmf_warmup{0.0, 0.1, 0.9};  // greedy, random, baseline
  std::array<double, 3> pmf{0.5, 0.25, 0.25};
  int random_attempts = 200;
  int heldout_steps = kStepsPerDay;
  double initial_temp_noise = 0.2;  // degC, uniform half-width
  bool squared_norms = false;
  int psd_max_iterations = 500;
  double psd_tolerance = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (kappa < 0.0 || !(load_unit_kw > 0.0)) throw ConfigError("invalid tracking weight or load unit");
    if (t_sim < 1 || n_pol < 1 || !(beta > 0.0)) throw ConfigError("t_sim, n_pol and beta must be positive");
    if (theta0_max < 0.0) throw ConfigError("theta0_max must be nonnegative");
    if (random_attempts < 1 || heldout_steps < 0) throw ConfigError("invalid exploration or held-out length");
    for (const auto* pm : {&pmf_warmup, &pmf}) {
      double sum = 0.0;
      for (double v : *pm) {
        if (v < 0.0) throw ConfigError("pmf entries must be nonnegative");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("pmf entries must sum to one");
    }
  }
};

struct GreedySettings {
  int budget = 2000;             // objective evaluations per chiller count
  int starts = 8;
  double penalty_weight = 1e3;   // per unit of admissibility residual, relative to max |theta|
  double repair_weight = 1.0;    // per unit of normalized coupling repair, relative to max |theta|
};

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  if (j.contains("training")) {
    const json& t = j.at("training");
    c.gamma = t.value("gamma", c.gamma);
    c.kappa = t.value("kappa", c.kappa);
    c.load_unit_kw = t.value("load_unit_kw", c.load_unit_kw);
    c.t_sim = t.value("t_sim", c.t_sim);
    c.n_pol = t.value("n_pol", c.n_pol);
    c.beta = t.value("beta", c.beta);
    c.theta0_max = t.value("theta0_max", c.theta0_max);
    c.warmup_iterations = t.value("warmup_iterations", c.warmup_iterations);
    c.pmf_warmup = t.value("pmf_warmup", c.pmf_warmup);
    c.pmf = t.value("pmf", c.pmf);
    c.random_attempts = t.value("random_attempts", c.random_attempts);
    c.heldout_steps = t.value("heldout_steps", c.heldout_steps);
    c.initial_temp_noise = t.value("initial_temp_noise_c", c.initial_temp_noise);
    c.squared_norms = t.value("squared_norms", c.squared_norms);
    c.psd_max_iterations = t.value("psd_max_iterations", c.psd_max_iterations);
    c.psd_tolerance = t.value("psd_tolerance", c.psd_tolerance);
    c.seed = t.value("seed", c.seed);
  }
  c.validate();
  return c;
}

inline GreedySettings greedy_settings_from_json(const json& j) {
  GreedySettings g;
  if (j.contains("greedy")) {
    const json& s = j.at("greedy");
    g.budget = s.value("budget", g.budget);
    g.starts = s.value("starts", g.starts);
    g.penalty_weight = s.value("penalty_weight", g.penalty_weight);
    g.repair_weight = s.value("repair_weight", g.repair_weight);
  }
  if (g.budget < 1 || g.starts < 1 || g.penalty_weight <= 0.0 || g.repair_weight < 0.0)
    throw ConfigError("invalid greedy settings");
  return g;
}

// Support and scaling from the "qfunction" section; theta starts at zero.
inline QuadraticQ qfunction_from_json(const json& j) {
  if (!j.contains("qfunction")) throw ConfigError("configuration lacks a qfunction section");
  const json& q = j.at("qfunction");
  QuadraticQ out;
  out.support = support_from_json(q.at("support"));
  out.scaling = scaling_from_json(q.at("scaling"));
  out.offset.fill(0.0);
  if (q.contains("offset")) {
    for (auto it = q.at("offset").begin(); it != q.at("offset").end(); ++it) {
      const int idx = component_index(it.key());
      if (idx < 0) throw ConfigError("unknown offset component: " + it.key());
      out.offset[idx] = it.value();
      if (!std::isfinite(out.offset[idx])) throw ConfigError("offset must be finite: " + it.key());
    }
  }
  out.theta = Eigen::VectorXd::Zero(out.size());
  return out;
}

// Everything the learning layer needs from one configuration file.
struct Configuration {
  PlantParams plant;
  ProjectionSettings projection;
  BaselineSettings baseline;
  TrainConfig train;
  GreedySettings greedy;
  QuadraticQ q_template;
  std::uint64_t hash = 0;
};

inline Configuration configuration_from_json(const json& j) {
  Configuration s;
  s.plant = plant_params_from_json(j);
  s.projection = projection_settings_from_json(j);
  s.baseline = baseline_settings_from_json(j);
  s.train = train_config_from_json(j);
  s.greedy = greedy_settings_from_json(j);
  s.q_template = qfunction_from_json(j);
  s.hash = config_hash(j);
  return s;
}

// ---------------------------------------------------------------------------
// Stage cost and TD residual

inline double stage_cost(const StepOutcome& o, double q_l_ref, double kappa, double load_unit_kw = 1000.0) {
  const double e = (o.q_l - q_l_ref) / load_unit_kw;
  return o.stage_elec_cost + kappa * e * e;
}

struct Transition {
  RlState x;
  ControlInput u;
  RlState x_next;
  double stage_cost = 0.0;
};

inline double td_error(const QuadraticQ& q, const Transition& t, const ControlInput& u_next, double gamma) {
  return t.stage_cost + gamma * q_value(q, t.x_next, u_next) - q_value(q, t.x, t.u);
}

// ---------------------------------------------------------------------------
// Greedy policy

struct GreedyResult {
  ControlInput u;
  double value = 0.0;        // penalized objective at u
  bool feasible = false;     // u passes input_feasible
  bool fallback = false;     // every chiller count failed; u is the baseline action
  bool truncated = false;    // some branch ran out of evaluations
};

// Penalized objective of one chiller-count branch over (m_lw, m_tw, m_cw, m_oa).
// The tank-bound limits on m_tw are part of the box; the chilled-water
// coupling m_lw + m_tw <= n_ch * m_indv is enforced by a repair map; every
// remaining admissibility violation enters through an exact (linear) penalty.
class GreedyBranch {
 public:
  GreedyBranch(const QuadraticQ& q, const RlState& x, int n_ch, const ProjectionSettings& ps, const PlantParams& p,
               const GreedySettings& gs)
      : q_(q), x_(x), n_(n_ch), ps_(ps), p_(p), gs_(gs) {
    const double m = q.theta.size() > 0 ? q.theta.cwiseAbs().maxCoeff() : 0.0;
    weight_scale_ = m > 0.0 ? m : 1.0;
    lower_ = {p.m_lw.min, p.m_tw.min, p.m_cw.min, p.m_oa.min};
    upper_ = {p.m_lw.max, p.m_tw.max, p.m_cw.max, p.m_oa.max};
    // Tank limits as flow limits, nudged inward so the rounded product respects them.
    double lo = std::max(p.m_tw.min, (p.s_min - x.x_p.s_twc) / p.t_s);
    double hi = std::min(p.m_tw.max, (p.s_max - x.x_p.s_twc) / p.t_s);
    while (x.x_p.s_twc + p.t_s * lo < p.s_min) lo = std::nextafter(lo, hi);
    while (x.x_p.s_twc + p.t_s * hi > p.s_max) hi = std::nextafter(hi, lo);
    if (lo > hi) lo = hi = std::clamp(0.0, p.m_tw.min, p.m_tw.max);
    lower_[1] = lo;
    upper_[1] = hi;
  }

  [[nodiscard]] const std::vector<double>& lower() const { return lower_; }
  [[nodiscard]] const std::vector<double>& upper() const { return upper_; }

  // Maps box coordinates to an input satisfying the coupling (when possible).
  [[nodiscard]] ControlInput repaired(std::span<const double> v, double* repair_distance = nullptr) const {
    ControlInput u{n_, v[0], v[1], v[2], v[3]};
    const double cap = n_ * p_.m_indv;
    if (u.m_lw + u.m_tw > cap) {
      u.m_tw = std::max(cap - u.m_lw, lower_[1]);
      if (u.m_lw + u.m_tw > cap) u.m_lw = std::max(cap - u.m_tw, p_.m_lw.min);
      while (u.m_lw + u.m_tw > cap && u.m_tw > lower_[1]) u.m_tw = std::nextafter(u.m_tw, lower_[1]);
      while (u.m_lw + u.m_tw > cap && u.m_lw > p_.m_lw.min) u.m_lw = std::nextafter(u.m_lw, p_.m_lw.min);
    }
    if (repair_distance != nullptr)
      *repair_distance = std::abs(u.m_lw - v[0]) / (upper_[0] - lower_[0]) +
                         std::abs(u.m_tw - v[1]) / std::max(upper_[1] - lower_[1], 1e-12);
    return u;
  }

  [[nodiscard]] double violation(const ControlInput& u) const {
    const FeasibilityReport r = input_feasible(x_.x_p, u, x_.disturbance(), ps_, p_);
    if (r.feasible) return 0.0;
    return std::isfinite(r.residual) ? std::max(r.residual, 1e-9) : 1e12;
  }

  double operator()(std::span<const double> v) const {
    double repair = 0.0;
    const ControlInput u = repaired(v, &repair);
    return q_value(q_, x_, u) + weight_scale_ * (gs_.penalty_weight * violation(u) + gs_.repair_weight * repair);
  }

  // Minimizer of the quadratic in the four flows with everything else fixed,
  // clamped to the box; a good start when P_theta is convex in the flows.
  [[nodiscard]] std::vector<double> quadratic_seed() const {
    const Eigen::MatrixXd P = q_.matrix();
    ControlInput u0{n_, 0.0, 0.0, 0.0, 0.0};
    const auto z = scaled(stack(x_, u0), q_);
    Eigen::VectorXd zr(kFeatureDim);
    constexpr int first = kStateDim + 1;  // m_lw
    for (int i = 0; i < kFeatureDim; ++i) zr[i] = (i >= first) ? 0.0 : z[i];
    const Eigen::MatrixXd Puu = P.block(first, first, 4, 4);
    const Eigen::VectorXd rhs = -(P.block(first, 0, 4, kFeatureDim) * zr);
    const Eigen::VectorXd zu = Puu.completeOrthogonalDecomposition().solve(rhs);
    std::vector<double> v(4);
    for (int k = 0; k < 4; ++k) {
      const double val = q_.offset[first + k] + zu[k] * q_.scaling[first + k];
      v[k] = std::isfinite(val) ? std::clamp(val, lower_[k], upper_[k]) : 0.5 * (lower_[k] + upper_[k]);
    }
    return v;
  }

 private:
  const QuadraticQ& q_;
  const RlState& x_;
  int n_;
  const ProjectionSettings& ps_;
  const PlantParams& p_;
  const GreedySettings& gs_;
  double weight_scale_ = 1.0;
  std::vector<double> lower_, upper_;
};

inline GreedyResult greedy_action(const QuadraticQ& q, const RlState& x, const ProjectionSettings& ps,
                                  const PlantParams& p, const GreedySettings& gs = {},
                                  const BaselineSettings& bs = {}) {
  GreedyResult best;
  best.value = std::numeric_limits<double>::infinity();
  const ControlInput bl = baseline_action(x, p, bs);
  bool truncated = false;
  for (int n = 1; n <= p.n_ch_max; ++n) {
    const GreedyBranch branch(q, x, n, ps, p, gs);
    BoxProblem prob;
    prob.objective = [&branch](std::span<const double> v) { return branch(v); };
    prob.lower = branch.lower();
    prob.upper = branch.upper();
    std::vector<double> bl_seed{bl.m_lw, bl.m_tw, bl.m_cw, bl.m_oa};
    for (int k = 0; k < 4; ++k) bl_seed[k] = std::clamp(bl_seed[k], prob.lower[k], prob.upper[k]);
    prob.seeds = {branch.quadratic_seed(), bl_seed};
    prob.budget = gs.budget;
    prob.starts = gs.starts;
    prob.rng_seed = 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(n);
    const BoxResult r = minimize_box(prob);
    truncated = truncated || r.truncated;
    const ControlInput u = branch.repaired(r.argmin);
    if (branch.violation(u) > 0.0) continue;
    // Strict comparison keeps the smaller chiller count on ties.
    if (r.value < best.value) {
      best.value = r.value;
      best.u = u;
      best.feasible = true;
    }
  }
  best.truncated = truncated;
  if (!best.feasible) {
    best.u = bl;
    best.fallback = true;
    best.feasible = input_feasible(x.x_p, bl, x.disturbance(), ps, p).feasible;
    best.value = q_value(q, x, bl);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Exploration

enum class ExploreBranch { Greedy = 0, Random = 1, Baseline = 2 };

inline const std::array<double, 3>& exploration_pmf(int j, const TrainConfig& c) {
  return j <= c.warmup_iterations ? c.pmf_warmup : c.pmf;
}

inline ExploreBranch draw_branch(const std::array<double, 3>& pmf, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < pmf[0]) return ExploreBranch::Greedy;
  if (u < pmf[0] + pmf[1]) return ExploreBranch::Random;
  return ExploreBranch::Baseline;
}

// Uniform draw over a box that already respects the tank limits and the
// chilled-water coupling, accepted only if the full admissibility test passes.
inline std::optional<ControlInput> random_feasible_input(const RlState& x, const ProjectionSettings& ps,
                                                         const PlantParams& p, std::mt19937_64& rng,
                                                         int attempts) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](double lo, double hi) { return lo + unit(rng) * (hi - lo); };
  double tw_lo = std::max(p.m_tw.min, (p.s_min - x.x_p.s_twc) / p.t_s);
  double tw_hi = std::min(p.m_tw.max, (p.s_max - x.x_p.s_twc) / p.t_s);
  for (int a = 0; a < attempts; ++a) {
    ControlInput u;
    u.n_ch = 1 + static_cast<int>(std::min<double>(unit(rng) * p.n_ch_max, p.n_ch_max - 1));
    u.m_tw = tw_lo <= tw_hi ? draw(tw_lo, tw_hi) : 0.0;
    const double lw_hi = std::min(p.m_lw.max, u.n_ch * p.m_indv - u.m_tw);
    u.m_lw = lw_hi >= p.m_lw.min ? draw(p.m_lw.min, lw_hi) : p.m_lw.min;
    u.m_cw = draw(p.m_cw.min, p.m_cw.max);
    u.m_oa = draw(p.m_oa.min, p.m_oa.max);
    if (input_feasible(x.x_p, u, x.disturbance(), ps, p).feasible) return u;
  }
  return std::nullopt;
}

struct ExploreResult {
  ControlInput u;
  ExploreBranch branch = ExploreBranch::Baseline;  // branch drawn from the pmf
  bool fell_back = false;                          // random draw exhausted its attempts
  std::optional<GreedyResult> greedy;              // set when the greedy branch ran
};

inline ExploreResult explore_action(int j, const RlState& x, const QuadraticQ& q, std::mt19937_64& rng,
                                    const TrainConfig& c, const ProjectionSettings& ps, const PlantParams& p,
                                    const GreedySettings& gs = {}, const BaselineSettings& bs = {}) {
  ExploreResult r;
  r.branch = draw_branch(exploration_pmf(j, c), rng);
  switch (r.branch) {
    case ExploreBranch::Greedy:
      r.greedy = greedy_action(q, x, ps, p, gs, bs);
      r.u = r.greedy->u;
      break;
    case ExploreBranch::Random:
      if (auto u = random_feasible_input(x, ps, p, rng, c.random_attempts)) {
        r.u = *u;
      } else {
        r.u = baseline_action(x, p, bs);
        r.fell_back = true;
      }
      break;
    case ExploreBranch::Baseline:
      r.u = baseline_action(x, p, bs);
      break;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Policy evaluation

struct TdSystem {
  Eigen::MatrixXd A;  // rows psi(x, u) - gamma psi(x+, u+)
  Eigen::VectorXd b;  // stage costs; TD residuals are b - A theta
};

inline TdSystem td_system(const QuadraticQ& q, const std::vector<Transition>& data,
                          const std::vector<ControlInput>& next_actions, double gamma) {
  if (data.size() != next_actions.size()) throw std::invalid_argument("one next action per transition required");
  TdSystem s;
  s.A.resize(static_cast<Eigen::Index>(data.size()), q.size());
  s.b.resize(static_cast<Eigen::Index>(data.size()));
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    s.A.row(r) = (features(q, data[k].x, data[k].u) - gamma * features(q, data[k].x_next, next_actions[k])).transpose();
    s.b[r] = data[k].stage_cost;
  }
  return s;
}

inline double condition_number(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0.0;
  const double lo = sv[sv.size() - 1];
  return lo > 0.0 ? sv[0] / lo : std::numeric_limits<double>::infinity();
}

struct EvaluationResult {
  Eigen::VectorXd theta;
  double td_norm = 0.0;  // ||b - A theta|| at the returned theta
  double condition_number = 0.0;
  PsdLsResult solver;
};

inline EvaluationResult policy_evaluation(const std::vector<Transition>& data,
                                          const std::vector<ControlInput>& next_actions, const QuadraticQ& q_prev,
                                          double alpha, const TrainConfig& c) {
  const TdSystem s = td_system(q_prev, data, next_actions, c.gamma);
  PsdLsProblem pr;
  pr.A = s.A;
  pr.b = s.b;
  pr.anchor = q_prev.theta;
  pr.alpha = alpha;
  pr.support = q_prev.support;
  pr.matrix_dim = kFeatureDim;
  pr.squared_norms = c.squared_norms;
  pr.max_iterations = c.psd_max_iterations;
  pr.tolerance = c.psd_tolerance;
  EvaluationResult r;
  r.solver = solve_psd_ls(pr);
  r.theta = r.solver.theta;
  r.td_norm = (s.b - s.A * r.theta).norm();
  r.condition_number = condition_number(s.A);
  return r;
}

// ---------------------------------------------------------------------------
// Training loop

struct IterationLog {
  int iteration = 0;
  double alpha = 0.0;
  double td_norm = 0.0;
  double condition_number = 0.0;
  std::array<int, 3> branch_counts{};  // greedy, random, baseline
  int random_fallbacks = 0;
  int greedy_fallbacks = 0;
  double episode_cost = 0.0;           // summed stage cost of the exploration episode
  double heldout_cost = 0.0;           // electricity cost of the greedy policy on the held-out day
  double heldout_relative_rmse = 0.0;
  bool solver_failed = false;
  double min_eigenvalue = 0.0;
};

struct TrainResult {
  QuadraticQ q;
  std::vector<IterationLog> log;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Nominal state with a uniformly drawn tank level and small temperature noise.
inline PlantState random_initial_state(const PlantParams& p, double temp_noise, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PlantState x = nominal_state(p, unit(rng));
  auto jitter = [&](double& t) { t += temp_noise * (2.0 * unit(rng) - 1.0); };
  jitter(x.t_lw_r);
  jitter(x.t_twc);
  jitter(x.t_tww);
  jitter(x.t_chw_s);
  jitter(x.t_cw_r);
  jitter(x.t_cw_s);
  return x;
}

inline Controller greedy_controller(const QuadraticQ& q, const Configuration& s) {
  return [&q, &s](const RlState& x) { return greedy_action(q, x, s.projection, s.plant, s.greedy, s.baseline).u; };
}

inline Controller baseline_controller(const Configuration& s) {
  return [&s](const RlState& x) { return baseline_action(x, s.plant, s.baseline); };
}

using IterationCallback = std::function<void(const IterationLog&)>;

// Episodes start at random offsets in the traces; the final heldout_steps
// samples are reserved for the per-iteration held-out evaluation.
inline TrainResult train(const TraceSet& traces, const Configuration& s, std::uint64_t seed,
                         const IterationCallback& on_iteration = {}) {
  const TrainConfig& c = s.train;
  const PlantParams& p = s.plant;
  const std::size_t reserve = static_cast<std::size_t>(c.heldout_steps);
  if (traces.size() < reserve + static_cast<std::size_t>(c.t_sim) + 1)
    throw std::invalid_argument("traces too short for one training episode plus the held-out window");
  const std::size_t last_start = traces.size() - reserve - static_cast<std::size_t>(c.t_sim) - 1;

  TrainResult out;
  out.q = s.q_template;
  {
    std::mt19937_64 rng(mix_seed(seed, 0));
    std::uniform_real_distribution<double> theta0(0.0, c.theta0_max);
    for (int l = 0; l < out.q.size(); ++l) out.q.theta[l] = theta0(rng);
  }

  for (int j = 0; j < c.n_pol; ++j) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(j) + 1));
    IterationLog log;
    log.iteration = j;
    log.alpha = j / c.beta;

    // (1) one contiguous exploration episode from a fresh initial state.
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, last_start)(rng);
    PlantState xp = random_initial_state(p, c.initial_temp_noise, rng);
    std::vector<Transition> data;
    std::vector<std::optional<ControlInput>> greedy_at(static_cast<std::size_t>(c.t_sim) + 1);
    data.reserve(static_cast<std::size_t>(c.t_sim));
    for (int k = 0; k < c.t_sim; ++k) {
      const std::size_t idx = start + static_cast<std::size_t>(k);
      Transition t;
      t.x = rl_state_at(xp, traces, idx);
      const ExploreResult e = explore_action(j, t.x, out.q, rng, c, s.projection, p, s.greedy, s.baseline);
      ++log.branch_counts[static_cast<int>(e.branch)];
      if (e.fell_back) ++log.random_fallbacks;
      if (e.greedy) {
        greedy_at[static_cast<std::size_t>(k)] = e.greedy->u;
        if (e.greedy->fallback) ++log.greedy_fallbacks;
      }
      t.u = e.u;
      const StepOutcome o = step(xp, t.u, t.x.disturbance(), t.x.rho, s.projection, p);
      xp = o.next_state;
      t.x_next = rl_state_at(xp, traces, idx + 1);
      t.stage_cost = stage_cost(o, t.x.q_l_ref, c.kappa, c.load_unit_kw);
      log.episode_cost += t.stage_cost;
      data.push_back(t);
    }

    // (2) greedy actions at every successor state under the current theta.
    std::vector<ControlInput> next_actions(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
      auto& cached = greedy_at[k + 1];
      if (!cached) cached = greedy_action(out.q, data[k].x_next, s.projection, p, s.greedy, s.baseline).u;
      next_actions[k] = *cached;
    }

    // (3)-(5) regularized policy evaluation anchored at the current theta.
    try {
      const EvaluationResult ev = policy_evaluation(data, next_actions, out.q, log.alpha, c);
      if (!ev.theta.allFinite()) throw std::runtime_error("non-finite solution");
      log.td_norm = ev.td_norm;
      log.condition_number = ev.condition_number;
      log.min_eigenvalue = ev.solver.min_eigenvalue;
      out.q.theta = ev.theta;
    } catch (const std::exception&) {
      log.solver_failed = true;
      const TdSystem sys = td_system(out.q, data, next_actions, c.gamma);
      log.td_norm = (sys.b - sys.A * out.q.theta).norm();
      log.condition_number = condition_number(sys.A);
      log.min_eigenvalue = min_eigenvalue(out.q.matrix());
    }

    if (c.heldout_steps > 0) {
      const PlantState x0 = nominal_state(p, 0.5);
      const Trajectory traj = simulate(greedy_controller(out.q, s), x0, traces, traces.size() - reserve, reserve,
                                       s.projection, p);
      const RunSummary sum = summarize(traj, p);
      log.heldout_cost = sum.electricity_cost;
      log.heldout_relative_rmse = sum.tracking_relative_rmse;
    }
    out.log.push_back(log);
    if (on_iteration) on_iteration(log);
  }
  return out;
}

}  // namespace dcep
