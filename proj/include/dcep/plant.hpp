#pragma once

// Algebraic thermodynamic and electrical-demand relations of the district
// cooling plant. Everything here is a pure function of its arguments; the
// implicit next-state solve lives in projection.hpp.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dcep/params.hpp"

namespace dcep {

inline constexpr double kKelvinOffset = 273.15;

class InfeasibleFlowError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InfeasibleInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// x^p: temperatures in degC, tank masses in kg.
struct PlantState {
  double t_lw_r = 0.0;
  double s_tww = 0.0;
  double s_twc = 0.0;
  double t_twc = 0.0;
  double t_tww = 0.0;
  double t_chw_s = 0.0;
  double t_cw_r = 0.0;
  double t_cw_s = 0.0;

  friend bool operator==(const PlantState&, const PlantState&) = default;
};

// u: chiller count plus four mass flows in kg/s. m_tw > 0 charges the cold tank.
struct ControlInput {
  int n_ch = 0;
  double m_lw = 0.0;
  double m_tw = 0.0;
  double m_cw = 0.0;
  double m_oa = 0.0;

  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

struct Disturbance {
  double t_oawb = 0.0;   // degC wet bulb
  double q_l_ref = 0.0;  // kW
};

struct PowerBreakdown {
  double p_ch = 0.0;
  double p_ct = 0.0;
  double p_chw_pump = 0.0;
  double p_cw_pump = 0.0;
  double p_tot = 0.0;
};

namespace detail {
inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::domain_error(std::string("non-finite ") + what);
}
}  // namespace detail

// Chiller electrical demand. Temperatures enter in degC and are used in
// Kelvin, so the first term carries the Carnot-like lift ratio.
inline double chiller_power(double t_cw_s, double t_chw_s, double q_ch, int n_ch, const PlantParams& p) {
  detail::require_finite(t_cw_s, "t_cw_s");
  detail::require_finite(t_chw_s, "t_chw_s");
  detail::require_finite(q_ch, "q_ch");
  if (n_ch <= 0) {
    if (q_ch != 0.0) throw std::domain_error("chiller load with no chiller running");
    return 0.0;
  }
  const double tc = t_cw_s + kKelvinOffset;
  const double te = t_chw_s + kKelvinOffset;
  if (!(te > 0.0)) throw std::domain_error("chilled-water temperature below absolute zero");
  const double ratio = tc / te;
  const double power = (ratio - 1.0) * q_ch - p.beta[0] + p.beta[1] * tc - p.beta[2] * ratio;
  return std::max(power, 0.0);
}

// a1 ln(1 + a2 m) + a3 m + a4; shared by both pump groups.
template <class Coeffs>
double pump_power(double m, const Coeffs& a) {
  detail::require_finite(m, "pump flow");
  const double arg = 1.0 + a[1] * m;
  if (m < 0.0 || !(arg > 0.0)) throw std::domain_error("pump power outside the log domain");
  return a[0] * std::log(arg) + a[2] * m + a[3];
}

inline double ct_fan_power(double m_oa, double lambda) {
  detail::require_finite(m_oa, "m_oa");
  if (m_oa < 0.0) throw std::domain_error("negative air flow");
  return lambda * m_oa * m_oa * m_oa;
}

// Raw tower capacity; negative when the return water is below wet bulb.
inline double ct_rejection_capacity(double m_cw, double m_oa, double t_cw_r, double t_oawb, const PlantParams& p) {
  detail::require_finite(t_cw_r, "t_cw_r");
  detail::require_finite(t_oawb, "t_oawb");
  if (!(m_oa > 0.0)) throw std::domain_error("cooling tower needs positive air flow");
  if (!(m_cw > 0.0)) throw std::domain_error("cooling tower needs positive water flow");
  const double num = p.c1 * std::pow(m_cw, p.c3);
  const double den = 1.0 + p.c2 * std::pow(m_cw / m_oa, p.c3);
  return num / den * (t_cw_r - t_oawb);
}

inline double load_supply_temp(double t_sw, double t_twc, double m_lw, double m_tw) {
  if (!(m_lw > 0.0)) throw std::domain_error("load-water flow must be positive");
  return t_sw + std::min(m_tw, 0.0) / m_lw * (t_sw - t_twc);
}

// Next-step load-water return temperature (one step of transport delay).
inline double load_return_temp(double q_l, double m_lw, double t_lw_s, double c_pw) {
  if (!(m_lw > 0.0)) throw std::domain_error("load-water flow must be positive");
  return t_lw_s + q_l / (c_pw * m_lw);
}

// Tank masses live on a 2^-20 kg grid so that transfers between the two
// tanks are exact in double precision and the total never drifts.
inline double quantize_mass(double kg) {
  constexpr double kGrid = 1048576.0;
  return std::nearbyint(kg * kGrid) / kGrid;
}

struct TesState {
  double s_twc = 0.0;
  double s_tww = 0.0;
  double t_twc = 0.0;
  double t_tww = 0.0;
};

inline TesState tes_update(double s_twc, double s_tww, double t_twc, double t_tww, double m_tw, double t_lw_r,
                           double t_sw, double t_s) {
  const double moved = quantize_mass(t_s * m_tw);
  const double cold_after = s_twc + moved;
  const double warm_after = s_tww - moved;
  if (!(cold_after > 0.0) || !(warm_after > 0.0))
    throw InfeasibleFlowError("tank transfer empties a tank");
  TesState next;
  next.s_twc = cold_after;
  next.s_tww = warm_after;
  next.t_tww = t_tww + t_s * std::min(m_tw, 0.0) / warm_after * (t_tww - t_lw_r);
  next.t_twc = t_twc + t_s * std::max(m_tw, 0.0) / cold_after * (t_sw - t_twc);
  return next;
}

struct Mixing {
  double t_sw = 0.0;
  double m_sw = 0.0;
  double t_rw = 0.0;
  double m_chw = 0.0;
  double m_bp = 0.0;
  double t_chw_r = 0.0;
};

// Chilled-water node balances. The unchecked form clamps an infeasible bypass
// to zero so callers that must keep simulating can still assemble a state.
inline Mixing mixing_relations_unchecked(const PlantState& x, const ControlInput& u, const PlantParams& p) {
  Mixing m;
  m.t_sw = x.t_chw_s;
  m.m_sw = u.m_lw + u.m_tw;
  m.t_rw = m.m_sw > 0.0 ? x.t_lw_r + std::max(u.m_tw, 0.0) / m.m_sw * (x.t_tww - x.t_lw_r) : x.t_lw_r;
  m.m_chw = u.n_ch * p.m_indv;
  m.m_bp = m.m_chw - m.m_sw;
  const double bypass = std::max(m.m_bp, 0.0);
  m.t_chw_r = m.m_chw > 0.0 ? m.t_rw + bypass / m.m_chw * (x.t_chw_s - m.t_rw) : m.t_rw;
  return m;
}

inline Mixing mixing_relations(const PlantState& x, const ControlInput& u, const PlantParams& p) {
  const double m_sw = u.m_lw + u.m_tw;
  const double m_chw = u.n_ch * p.m_indv;
  if (m_chw <= 0.0 && m_sw > 0.0) throw InfeasibleInputError("supply flow with no chiller running");
  if (m_chw - m_sw < 0.0) throw InfeasibleInputError("negative bypass flow: chillers cannot carry the supply");
  return mixing_relations_unchecked(x, u, p);
}

struct CondenserTower {
  double q_cond = 0.0;
  double t_cw_r_next = 0.0;
  double t_cw_s_next = 0.0;
  double residual = 0.0;  // max violation of t_cw_r' <= t_cwr_max and t_cw_s' >= t_oawb + approach
};

inline CondenserTower condenser_and_tower(double q_ch, double p_ch, double t_cw_s, double t_cw_r, double m_cw,
                                          double q_evap, double t_oawb, const PlantParams& p) {
  if (!(m_cw > 0.0)) throw std::domain_error("cooling-water flow must be positive");
  CondenserTower out;
  out.q_cond = q_ch + p.eta1 * p_ch;
  out.t_cw_r_next = t_cw_s + out.q_cond / (p.c_pw * m_cw);
  out.t_cw_s_next = t_cw_r - q_evap / (p.c_pw * m_cw);
  out.residual = std::max({0.0, out.t_cw_r_next - p.t_cwr_max, t_oawb + p.t_cws_approach - out.t_cw_s_next});
  return out;
}

struct PowerAndCost {
  PowerBreakdown power;
  double cost = 0.0;  // USD for one step
};

inline PowerAndCost total_power_and_cost(const ControlInput& u, double p_ch, double price, const PlantParams& p) {
  PowerAndCost r;
  r.power.p_ch = p_ch;
  r.power.p_ct = ct_fan_power(u.m_oa, p.lambda);
  r.power.p_chw_pump = u.n_ch > 0 ? pump_power(u.n_ch * p.m_indv, p.alpha) : 0.0;
  r.power.p_cw_pump = pump_power(u.m_cw, p.gamma);
  r.power.p_tot = r.power.p_ch + r.power.p_ct + r.power.p_chw_pump + r.power.p_cw_pump;
  r.cost = p.t_s_hours() * price * r.power.p_tot;
  return r;
}

}  // namespace dcep
