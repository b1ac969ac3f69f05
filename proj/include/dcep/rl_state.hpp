#pragma once

#include <array>
#include <string_view>

#include "dcep/plant.hpp"

namespace dcep {

// Learning state: plant state plus wet bulb, load reference, price and its
// trailing average.
struct RlState {
  PlantState x_p;
  double t_oawb = 0.0;
  double q_l_ref = 0.0;
  double rho = 0.0;      // USD/kWh
  double rho_bar = 0.0;  // USD/kWh

  [[nodiscard]] Disturbance disturbance() const { return {t_oawb, q_l_ref}; }
};

inline constexpr int kStateDim = 12;
inline constexpr int kInputDim = 5;
inline constexpr int kFeatureDim = kStateDim + kInputDim;

// Component order of [x, u]; also the names used in configuration files.
inline constexpr std::array<std::string_view, kFeatureDim> kComponentNames = {
    "t_lw_r", "s_tww", "s_twc", "t_twc",   "t_tww", "t_chw_s", "t_cw_r", "t_cw_s", "t_oawb",
    "q_l_ref", "rho",  "rho_bar", "n_ch", "m_lw",  "m_tw",    "m_cw",   "m_oa"};

inline int component_index(std::string_view name) {
  for (int i = 0; i < kFeatureDim; ++i)
    if (kComponentNames[i] == name) return i;
  return -1;
}

using StateInputVector = std::array<double, kFeatureDim>;

inline StateInputVector stack(const RlState& x, const ControlInput& u) {
  const PlantState& p = x.x_p;
  return {p.t_lw_r, p.s_tww, p.s_twc,   p.t_twc,  p.t_tww,  p.t_chw_s, p.t_cw_r, p.t_cw_s,  x.t_oawb,
          x.q_l_ref, x.rho,  x.rho_bar, double(u.n_ch), u.m_lw, u.m_tw, u.m_cw, u.m_oa};
}

}  // namespace dcep
