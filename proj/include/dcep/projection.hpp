#pragma once

// Implicit plant step. The decision vector is
//   Z = [t_chw_s(k+1), t_cw_s(k+1), q_l(k)]
// and the step returns the A-weighted projection of the nominal target
// Z_bar = [t_chw_s_target, t_cw_s_target, q_l_ref] onto the set of Z that are
// consistent with the heat balances and every exchanger capacity.
//
// Because all couplings between the three components pass through unit
// delays, each constraint depends on a single coordinate and is monotone in
// it, so the feasible set is a box computed in closed form (Solver::Interval).
// The augmented-Lagrangian route treats the same constraint list as a generic
// smooth program and is kept as an independent solver.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "dcep/params.hpp"
#include "dcep/plant.hpp"

namespace dcep {

using ZVector = std::array<double, 3>;

struct StepOutcome {
  PlantState next_state;
  ZVector z{};
  double q_l = 0.0;
  double q_ch = 0.0;
  double q_evap = 0.0;
  double q_cond = 0.0;
  double q_ct_rej = 0.0;
  PowerBreakdown power;
  double stage_elec_cost = 0.0;
  bool feasible = false;
  double constraint_residual = 0.0;
};

namespace detail {

// Everything the projection needs that does not depend on Z.
struct ProjectionData {
  PlantState x;
  ControlInput u;
  Disturbance w;
  const PlantParams* p = nullptr;
  Mixing mix;
  double t_lw_s = 0.0;
  double lw_capacity = 0.0;   // c_pw * m_lw, kW/K
  double chw_capacity = 0.0;  // c_pw * m_chw
  double cw_capacity = 0.0;   // c_pw * m_cw
  double q_ct_rej = 0.0;      // clamped at 0
  double lift_slope = 0.0;    // d P_ch / d q_ch (before the clamp)
  double lift_offset = 0.0;   // P_ch at q_ch = 0 (before the clamp)
  double input_residual = 0.0;

  [[nodiscard]] double q_ch(double t_chw_s_next) const { return chw_capacity * (mix.t_chw_r - t_chw_s_next); }
  [[nodiscard]] double p_ch(double q_ch) const {
    return std::max(0.0, lift_slope * q_ch + lift_offset);
  }
  [[nodiscard]] double q_cond(double q_ch) const { return q_ch + p->eta1 * p_ch(q_ch); }
  [[nodiscard]] double t_lw_r_next(double q_l) const { return t_lw_s + q_l / lw_capacity; }
  [[nodiscard]] double q_evap(double t_cw_s_next) const { return cw_capacity * (x.t_cw_r - t_cw_s_next); }
};

inline constexpr int kConstraintCount = 11;
using ConstraintValues = std::array<double, kConstraintCount>;
inline ProjectionData make_projection_data(const PlantState& x, const ControlInput& u, const Disturbance& w,
                                           const PlantParams& p) {
  if (u.n_ch < 1) throw InfeasibleInputError("at least one chiller must run");
  if (!(u.m_lw > 0.0) || !(u.m_cw > 0.0) || !(u.m_oa > 0.0))
    throw InfeasibleInputError("load water, cooling water and air flows must be positive");
  ProjectionData d;
  d.x = x;
  d.u = u;
  d.w = w;
  d.p = &p;
  d.mix = mixing_relations_unchecked(x, u, p);
  d.t_lw_s = load_supply_temp(d.mix.t_sw, x.t_twc, u.m_lw, u.m_tw);
  d.lw_capacity = p.c_pw * u.m_lw;
  d.chw_capacity = p.c_pw * d.mix.m_chw;
  d.cw_capacity = p.c_pw * u.m_cw;
  d.q_ct_rej = std::max(0.0, ct_rejection_capacity(u.m_cw, u.m_oa, x.t_cw_r, w.t_oawb, p));
  const double tc = x.t_cw_s + kKelvinOffset;
  const double te = x.t_chw_s + kKelvinOffset;
  const double ratio = tc / te;
  d.lift_slope = ratio - 1.0;
  d.lift_offset = -p.beta[0] + p.beta[1] * tc - p.beta[2] * ratio;
  d.input_residual = std::max(0.0, -d.mix.m_bp);
  return d;
}

// g(Z) <= 0, in natural units (kW or degC).
inline ConstraintValues constraint_values(const ProjectionData& d, const ZVector& z) {
  const PlantParams& p = *d.p;
  const double a = z[0], b = z[1], q = z[2];
  const double t_lw_r_next = d.t_lw_r_next(q);
  const double q_ch = d.q_ch(a);
  const double t_cw_r_next = d.x.t_cw_s + d.q_cond(q_ch) / d.cw_capacity;
  const double q_evap = d.q_evap(b);
  return {-q,
          q - d.w.q_l_ref,
          p.t_lw_r.min - t_lw_r_next,
          t_lw_r_next - p.t_lw_r.max,
          -q_ch,
          q_ch - d.u.n_ch * p.q_rated_indv,
          p.t_chws_min - a,
          t_cw_r_next - p.t_cwr_max,
          -q_evap,
          q_evap - d.q_ct_rej,
          d.w.t_oawb + p.t_cws_approach - b};
}

inline double max_violation(const ConstraintValues& g) {
  double r = 0.0;
  for (double v : g) r = std::max(r, v);
  return r;
}

inline double weighted_distance(const ZVector& z, const ZVector& target, const std::array<double, 3>& weights) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += weights[i] * (z[i] - target[i]) * (z[i] - target[i]);
  return std::sqrt(s);
}

struct CoordinateBox {
  double hard_lo, hard_hi, soft_lo, soft_hi;
};

// Largest chiller load whose condenser heat keeps t_cw_r' <= t_cwr_max.
inline double condenser_limited_q_ch(const ProjectionData& d) {
  const PlantParams& p = *d.p;
  const double q_cond_max = d.cw_capacity * (p.t_cwr_max - d.x.t_cw_s);
  // q_cond is continuous and increasing in q_ch; invert the active branch.
  if (d.lift_slope * q_cond_max + d.lift_offset <= 0.0) return q_cond_max;
  return (q_cond_max - p.eta1 * d.lift_offset) / (1.0 + p.eta1 * d.lift_slope);
}

inline std::array<CoordinateBox, 3> coordinate_boxes(const ProjectionData& d) {
  const PlantParams& p = *d.p;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::array<CoordinateBox, 3> boxes{};
  // t_chw_s(k+1): q_ch in [0, n q_rated] is hard; t_chws_min and the condenser limit are soft.
  boxes[0].hard_lo = d.mix.t_chw_r - d.u.n_ch * p.q_rated_indv / d.chw_capacity;
  boxes[0].hard_hi = d.mix.t_chw_r;
  boxes[0].soft_lo = std::max(p.t_chws_min, d.mix.t_chw_r - condenser_limited_q_ch(d) / d.chw_capacity);
  boxes[0].soft_hi = inf;
  // t_cw_s(k+1): evaporation in [0, q_ct_rej] is hard; the wet-bulb approach is soft.
  boxes[1].hard_lo = d.x.t_cw_r - d.q_ct_rej / d.cw_capacity;
  boxes[1].hard_hi = d.x.t_cw_r;
  boxes[1].soft_lo = d.w.t_oawb + p.t_cws_approach;
  boxes[1].soft_hi = inf;
  // q_l: [0, q_l_ref] is hard; the return-temperature window is soft.
  boxes[2].hard_lo = 0.0;
  boxes[2].hard_hi = d.w.q_l_ref;
  boxes[2].soft_lo = d.lw_capacity * (p.t_lw_r.min - d.t_lw_s);
  boxes[2].soft_hi = d.lw_capacity * (p.t_lw_r.max - d.t_lw_s);
  return boxes;
}

inline ZVector solve_interval(const ProjectionData& d, const ZVector& target) {
  const auto boxes = coordinate_boxes(d);
  ZVector z{};
  for (int i = 0; i < 3; ++i) {
    const CoordinateBox& b = boxes[i];
    const double lo = std::max(b.hard_lo, b.soft_lo);
    const double hi = std::min(b.hard_hi, b.soft_hi);
    if (lo <= hi) {
      z[i] = std::clamp(target[i], lo, hi);
    } else {
      const double soft = std::clamp(target[i], b.soft_lo, std::max(b.soft_lo, b.soft_hi));
      z[i] = std::clamp(soft, b.hard_lo, b.hard_hi);
    }
  }
  return z;
}

// Powell-Hestenes-Rockafellar augmented Lagrangian in whitened coordinates
// y = sqrt(A)(Z - Z_bar); each constraint is normalised by its slope so the
// inner problem is close to isotropic.
inline ZVector solve_augmented_lagrangian(const ProjectionData& d, const ZVector& target,
                                          const ProjectionSettings& s) {
  std::array<double, 3> sw{};
  for (int i = 0; i < 3; ++i) sw[i] = std::sqrt(s.weights[i]);
  auto to_z = [&](const std::array<double, 3>& y) {
    ZVector z{};
    for (int i = 0; i < 3; ++i) z[i] = target[i] + y[i] / sw[i];
    return z;
  };

  // Slope of each constraint with respect to y, from a central difference at the target.
  ConstraintValues scale{};
  for (int i = 0; i < 3; ++i) {
    const double h = 1e-4;
    std::array<double, 3> yp{}, ym{};
    yp[i] = h;
    ym[i] = -h;
    const auto gp = constraint_values(d, to_z(yp));
    const auto gm = constraint_values(d, to_z(ym));
    for (int c = 0; c < kConstraintCount; ++c) {
      scale[c] = std::max(scale[c], std::abs(gp[c] - gm[c]) / (2 * h));
    }
  }
  for (double& v : scale)
    if (!(v > 0.0)) v = 1.0;

  auto scaled_g = [&](const std::array<double, 3>& y) {
    auto g = constraint_values(d, to_z(y));
    for (int c = 0; c < kConstraintCount; ++c) g[c] /= scale[c];
    return g;
  };

  std::mt19937_64 rng(s.al_seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::array<double, 3> best_y{};
  double best_obj = std::numeric_limits<double>::infinity();
  double best_res = std::numeric_limits<double>::infinity();

  for (int start = 0; start < std::max(1, s.al_starts); ++start) {
    std::array<double, 3> y{};
    if (start > 0)
      for (double& v : y) v = noise(rng);
    ConstraintValues lambda{};
    double mu = 10.0;
    double prev_res = std::numeric_limits<double>::infinity();

    auto lagrangian = [&](const std::array<double, 3>& yy) {
      const auto g = scaled_g(yy);
      double v = yy[0] * yy[0] + yy[1] * yy[1] + yy[2] * yy[2];
      for (int c = 0; c < kConstraintCount; ++c) {
        const double t = std::max(0.0, lambda[c] + mu * g[c]);
        v += (t * t - lambda[c] * lambda[c]) / (2 * mu);
      }
      return v;
    };

    for (int outer = 0; outer < s.al_outer; ++outer) {
      double step = 1.0 / (2.0 + mu);
      for (int inner = 0; inner < s.al_inner; ++inner) {
        const double f0 = lagrangian(y);
        std::array<double, 3> grad{};
        for (int i = 0; i < 3; ++i) {
          const double h = 1e-7 * std::max(1.0, std::abs(y[i]));
          auto yp = y, ym = y;
          yp[i] += h;
          ym[i] -= h;
          grad[i] = (lagrangian(yp) - lagrangian(ym)) / (2 * h);
        }
        const double gn2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
        if (gn2 < 1e-24) break;
        // Armijo backtracking; the step grows back after every success.
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
          std::array<double, 3> trial{};
          for (int i = 0; i < 3; ++i) trial[i] = y[i] - step * grad[i];
          if (lagrangian(trial) <= f0 - 0.25 * step * gn2) {
            y = trial;
            moved = true;
            step *= 2.0;
            break;
          }
          step *= 0.5;
        }
        if (!moved) break;
      }
      const auto g = scaled_g(y);
      double res = 0.0;
      for (int c = 0; c < kConstraintCount; ++c) {
        lambda[c] = std::max(0.0, lambda[c] + mu * g[c]);
        res = std::max(res, g[c]);
      }
      if (res <= s.al_tolerance && outer > 0) {
        bool converged = true;
        for (int c = 0; c < kConstraintCount; ++c)
          if (lambda[c] > 0.0 && std::abs(g[c]) > s.al_tolerance) converged = false;
        if (converged) break;
      }
      if (res > 0.25 * prev_res) mu = std::min(mu * 10.0, 1e12);
      prev_res = res;
    }
    const double obj = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    const double res = max_violation(scaled_g(y));
    const bool better = (res <= s.al_tolerance && best_res <= s.al_tolerance) ? obj < best_obj
                                                                               : res < best_res;
    if (better) {
      best_y = y;
      best_obj = obj;
      best_res = res;
    }
  }
  return to_z(best_y);
}

}  // namespace detail

// Assembles the next state and every reported quantity from a solved Z.
inline StepOutcome assemble_outcome(const detail::ProjectionData& d, const ZVector& z, double price) {
  const PlantParams& p = *d.p;
  StepOutcome out;
  out.z = z;
  out.q_l = z[2];
  out.q_ch = d.q_ch(z[0]);
  out.q_evap = d.q_evap(z[1]);
  out.q_ct_rej = d.q_ct_rej;
  const double p_ch = chiller_power(d.x.t_cw_s, d.x.t_chw_s, out.q_ch, d.u.n_ch, p);
  const CondenserTower ct =
      condenser_and_tower(out.q_ch, p_ch, d.x.t_cw_s, d.x.t_cw_r, d.u.m_cw, out.q_evap, d.w.t_oawb, p);
  out.q_cond = ct.q_cond;

  const TesState tes = tes_update(d.x.s_twc, d.x.s_tww, d.x.t_twc, d.x.t_tww, d.u.m_tw, d.x.t_lw_r, d.mix.t_sw, p.t_s);
  PlantState& n = out.next_state;
  n.t_lw_r = load_return_temp(out.q_l, d.u.m_lw, d.t_lw_s, p.c_pw);
  n.s_tww = tes.s_tww;
  n.s_twc = tes.s_twc;
  n.t_twc = tes.t_twc;
  n.t_tww = tes.t_tww;
  n.t_chw_s = z[0];
  n.t_cw_r = ct.t_cw_r_next;
  n.t_cw_s = z[1];

  const PowerAndCost pc = total_power_and_cost(d.u, p_ch, price, p);
  out.power = pc.power;
  out.stage_elec_cost = pc.cost;

  const double tes_violation = std::max({0.0, p.s_min - n.s_twc, n.s_twc - p.s_max, p.s_min - n.s_tww,
                                         n.s_tww - p.s_max});
  out.constraint_residual =
      std::max({detail::max_violation(detail::constraint_values(d, z)), d.input_residual, tes_violation});
  out.feasible = out.constraint_residual <= 1e-6;
  return out;
}

// One plant step: solves the projection and assembles x^p(k+1).
inline StepOutcome step(const PlantState& x, const ControlInput& u, const Disturbance& w, double price,
                        const ProjectionSettings& s, const PlantParams& p) {
  const detail::ProjectionData d = detail::make_projection_data(x, u, w, p);
  const ZVector target{s.t_chw_s_target, s.t_cw_s_target, w.q_l_ref};
  const ZVector z = s.solver == ProjectionSettings::Solver::Interval ? detail::solve_interval(d, target)
                                                                    : detail::solve_augmented_lagrangian(d, target, s);
  return assemble_outcome(d, z, price);
}

struct FeasibilityReport {
  bool feasible = false;
  bool in_box = false;
  bool load_flow_ok = false;
  bool chiller_flow_ok = false;
  bool tes_ok = false;
  bool tower_ok = false;
  bool cws_window_ok = false;
  bool projection_ok = false;
  double residual = 0.0;  // largest violation across all checks, natural units
  StepOutcome trial;
};

// Admissible-input test. Conditions that involve the next state or internal
// heat flows are evaluated on a trial projection step.
inline FeasibilityReport input_feasible(const PlantState& x, const ControlInput& u, const Disturbance& w,
                                        const ProjectionSettings& s, const PlantParams& p) {
  FeasibilityReport r;
  auto violate = [&r](double v) { r.residual = std::max(r.residual, v); };
  const bool finite = std::isfinite(u.m_lw) && std::isfinite(u.m_tw) && std::isfinite(u.m_cw) &&
                      std::isfinite(u.m_oa);
  if (!finite) {
    r.residual = std::numeric_limits<double>::infinity();
    return r;
  }
  r.in_box = u.n_ch >= 1 && u.n_ch <= p.n_ch_max && p.m_lw.contains(u.m_lw) && p.m_tw.contains(u.m_tw) &&
             p.m_cw.contains(u.m_cw) && p.m_oa.contains(u.m_oa);
  violate(std::max({0.0, p.m_lw.min - u.m_lw, u.m_lw - p.m_lw.max, p.m_tw.min - u.m_tw, u.m_tw - p.m_tw.max,
                    p.m_cw.min - u.m_cw, u.m_cw - p.m_cw.max, p.m_oa.min - u.m_oa, u.m_oa - p.m_oa.max}));
  if (u.n_ch < 1 || u.n_ch > p.n_ch_max) violate(1.0);

  r.load_flow_ok = u.m_lw >= p.m_lw.min;
  const double chw_excess = u.m_lw + u.m_tw - u.n_ch * p.m_indv;
  r.chiller_flow_ok = chw_excess <= 0.0;
  violate(chw_excess);
  const double cold_after = x.s_twc + p.t_s * u.m_tw;
  r.tes_ok = cold_after >= p.s_min && cold_after <= p.s_max;
  violate(std::max({0.0, p.s_min - cold_after, cold_after - p.s_max}));

  if (u.n_ch >= 1 && u.m_lw > 0.0 && u.m_cw > 0.0 && u.m_oa > 0.0) {
    const detail::ProjectionData d = detail::make_projection_data(x, u, w, p);
    const ZVector target{s.t_chw_s_target, s.t_cw_s_target, w.q_l_ref};
    // The box route is exact, so the trial does not depend on the configured solver.
    r.trial = assemble_outcome(d, detail::solve_interval(d, target), 0.0);
    r.projection_ok = r.trial.feasible;
    violate(r.trial.constraint_residual);
    r.tower_ok = r.trial.q_ct_rej >= r.trial.q_evap;
    violate(r.trial.q_evap - r.trial.q_ct_rej);
    const double lo = std::max(p.t_cws_floor, w.t_oawb + p.t_cws_wetbulb_margin);
    const double hi = std::min(x.t_cw_r, p.t_cws_ceiling);
    const double t_next = r.trial.next_state.t_cw_s;
    r.cws_window_ok = t_next >= lo && t_next <= hi;
    violate(std::max({0.0, lo - t_next, t_next - hi}));
  } else {
    violate(1.0);
  }
  r.feasible = r.in_box && r.load_flow_ok && r.chiller_flow_ok && r.tes_ok && r.projection_ok && r.tower_ok &&
               r.cws_window_ok;
  return r;
}

}  // namespace dcep
