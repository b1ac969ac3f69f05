#pragma once

// Shared fixtures for the unit and acceptance suites: default configuration,
// random plant situations and an independent re-derivation of the projection
// feasible set from the plant relations.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "dcep/dcep.hpp"

namespace dcep::testing {

inline const json& default_config() {
  static const json j = load_json_file(DCEP_DEFAULT_CONFIG);
  return j;
}

inline const Configuration& default_setup() {
  static const Configuration s = configuration_from_json(default_config());
  return s;
}

struct Situation {
  PlantState x;
  ControlInput u;
  Disturbance w;
  double price = 0.1;
};

// Plant state near nominal operation with a random tank level.
inline PlantState random_state(const PlantParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + unit(rng) * (hi - lo); };
  PlantState x = nominal_state(p, in(0.02, 0.98));
  x.t_lw_r = in(9.0, 14.0);
  x.t_twc = in(6.0, 8.0);
  x.t_tww = in(11.0, 14.0);
  x.t_chw_s = in(6.0, 9.0);
  x.t_cw_r = in(31.0, 37.0);
  x.t_cw_s = in(27.0, 31.0);
  return x;
}

inline ControlInput random_input(const PlantParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto in = [&](const Range& r) { return r.min + unit(rng) * (r.max - r.min); };
  ControlInput u;
  u.n_ch = 1 + static_cast<int>(unit(rng) * p.n_ch_max) % p.n_ch_max;
  u.m_tw = in(p.m_tw);
  u.m_lw = std::clamp(in(p.m_lw), p.m_lw.min, std::max(p.m_lw.min, u.n_ch * p.m_indv - u.m_tw));
  u.m_cw = in(p.m_cw);
  u.m_oa = in(p.m_oa);
  return u;
}

inline Disturbance random_disturbance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return {24.0 + 4.0 * unit(rng), 500.0 + 4500.0 * unit(rng)};
}

// Draws situations until one passes the admissibility test.
inline Situation random_feasible_situation(const Configuration& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    Situation c;
    c.x = random_state(s.plant, rng);
    c.u = random_input(s.plant, rng);
    c.w = random_disturbance(rng);
    c.price = 0.03 + 0.15 * unit(rng);
    if (input_feasible(c.x, c.u, c.w, s.projection, s.plant).feasible) return c;
  }
}

// Membership test for the projection feasible set rebuilt from the plant
// relations (not from the solver's own constraint list). Returns the largest
// violation in natural units.
inline double omega_violation(const Situation& c, const std::array<double, 3>& z, const PlantParams& p) {
  const double t_chw_s_next = z[0], t_cw_s_next = z[1], q_l = z[2];
  const Mixing m = mixing_relations(c.x, c.u, p);
  const double t_lw_s = load_supply_temp(m.t_sw, c.x.t_twc, c.u.m_lw, c.u.m_tw);
  const double t_lw_r_next = load_return_temp(q_l, c.u.m_lw, t_lw_s, p.c_pw);
  const double q_ch = p.c_pw * m.m_chw * (m.t_chw_r - t_chw_s_next);
  const double p_ch = chiller_power(c.x.t_cw_s, c.x.t_chw_s, std::max(q_ch, 0.0), c.u.n_ch, p);
  const double q_evap = p.c_pw * c.u.m_cw * (c.x.t_cw_r - t_cw_s_next);
  const CondenserTower ct = condenser_and_tower(q_ch, p_ch, c.x.t_cw_s, c.x.t_cw_r, c.u.m_cw, q_evap, c.w.t_oawb, p);
  const double rej = std::max(0.0, ct_rejection_capacity(c.u.m_cw, c.u.m_oa, c.x.t_cw_r, c.w.t_oawb, p));
  return std::max({0.0, -q_l, q_l - c.w.q_l_ref, p.t_lw_r.min - t_lw_r_next, t_lw_r_next - p.t_lw_r.max, -q_ch,
                   q_ch - c.u.n_ch * p.q_rated_indv, p.t_chws_min - t_chw_s_next, ct.t_cw_r_next - p.t_cwr_max,
                   -q_evap, q_evap - rej, c.w.t_oawb + p.t_cws_approach - t_cw_s_next});
}

inline double weighted_distance_to_target(const std::array<double, 3>& z, const Situation& c,
                                          const ProjectionSettings& ps) {
  const double a = z[0] - ps.t_chw_s_target, b = z[1] - ps.t_cw_s_target, q = z[2] - c.w.q_l_ref;
  return std::sqrt(ps.weights[0] * a * a + ps.weights[1] * b * b + ps.weights[2] * q * q);
}

// Best weighted distance over uniform samples of the feasible set, drawn from
// the bounding box given by the hard capacity limits. Returns +inf when no
// sample is feasible.
inline double monte_carlo_best_distance(const Situation& c, const Configuration& s, int samples, std::mt19937_64& rng,
                                        int* feasible_count = nullptr) {
  const PlantParams& p = s.plant;
  const Mixing m = mixing_relations(c.x, c.u, p);
  const double chw_cap = p.c_pw * m.m_chw;
  const double cw_cap = p.c_pw * c.u.m_cw;
  const double rej = std::max(0.0, ct_rejection_capacity(c.u.m_cw, c.u.m_oa, c.x.t_cw_r, c.w.t_oawb, p));
  const std::array<double, 2> a{m.t_chw_r - c.u.n_ch * p.q_rated_indv / chw_cap, m.t_chw_r};
  const std::array<double, 2> b{c.x.t_cw_r - rej / cw_cap, c.x.t_cw_r};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double best = std::numeric_limits<double>::infinity();
  int count = 0;
  for (int k = 0; k < samples; ++k) {
    const std::array<double, 3> z{a[0] + unit(rng) * (a[1] - a[0]), b[0] + unit(rng) * (b[1] - b[0]),
                                  unit(rng) * c.w.q_l_ref};
    if (omega_violation(c, z, p) > 0.0) continue;
    ++count;
    best = std::min(best, weighted_distance_to_target(z, c, s.projection));
  }
  if (feasible_count != nullptr) *feasible_count = count;
  return best;
}

}  // namespace dcep::testing
