#pragma once

// Rule-based baseline controller.
//
// Load-water flow follows the nominal coil design temperatures, the tank is
// charged or discharged at full rate depending on whether the current price
// is below or above its trailing average, the chiller count covers the
// resulting chilled-water flow, the condenser flow is sized for a nominal
// temperature rise and the tower air flow is the smallest one whose
// rejection capacity covers the estimated condenser heat.

#include <algorithm>
#include <cmath>

#include "dcep/params.hpp"
#include "dcep/plant.hpp"
#include "dcep/rl_state.hpp"

namespace dcep {

inline ControlInput baseline_action(const RlState& x, const PlantParams& p, const BaselineSettings& s = {}) {
  const PlantState& xp = x.x_p;
  ControlInput u;

  u.m_lw = p.m_lw.clamp(x.q_l_ref / (p.c_pw * (s.coil_return_c - s.coil_supply_c)));

  // Full-rate charge/discharge; stop when either tank would leave its bounds.
  double m_tw = 0.0;
  if (x.rho < x.rho_bar) {
    m_tw = p.m_tw.max;
  } else if (x.rho > x.rho_bar) {
    m_tw = p.m_tw.min;
  }
  const double moved = p.t_s * m_tw;
  const double cold_after = xp.s_twc + moved;
  const double warm_after = xp.s_tww - moved;
  if (cold_after > p.s_max || cold_after < p.s_min || warm_after > p.s_max || warm_after < p.s_min) m_tw = 0.0;
  u.m_tw = m_tw;

  const double chw_flow = u.m_lw + std::max(u.m_tw, 0.0);
  u.n_ch = std::clamp(static_cast<int>(std::ceil(chw_flow / p.m_indv - 1e-12)), 1, p.n_ch_max);

  // Condenser heat at the nominal coil temperature difference.
  const double q_ch_est = std::clamp(p.c_pw * (u.m_lw + u.m_tw) * (s.coil_return_c - s.coil_supply_c), 0.0,
                                     u.n_ch * p.q_rated_indv);
  const double p_ch_est = chiller_power(xp.t_cw_s, xp.t_chw_s, q_ch_est, u.n_ch, p);
  const double q_cond_est = q_ch_est + p.eta1 * p_ch_est;
  u.m_cw = p.m_cw.clamp(q_cond_est / (p.c_pw * s.condenser_delta_t));

  // Tower capacity is nondecreasing in air flow: bisect for the smallest adequate value.
  auto capacity = [&](double m_oa) { return ct_rejection_capacity(u.m_cw, m_oa, xp.t_cw_r, x.t_oawb, p); };
  if (capacity(p.m_oa.max) < q_cond_est) {
    u.m_oa = p.m_oa.max;
  } else if (capacity(p.m_oa.min) >= q_cond_est) {
    u.m_oa = p.m_oa.min;
  } else {
    double lo = p.m_oa.min, hi = p.m_oa.max;
    while (hi - lo > s.m_oa_tolerance) {
      const double mid = 0.5 * (lo + hi);
      (capacity(mid) >= q_cond_est ? hi : lo) = mid;
    }
    u.m_oa = hi;
  }
  return u;
}

}  // namespace dcep
