#pragma once

// Closed-loop simulation over a trace window and the evaluation summary.

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "dcep/params.hpp"
#include "dcep/plant.hpp"
#include "dcep/projection.hpp"
#include "dcep/rl_state.hpp"
#include "dcep/traces.hpp"

namespace dcep {

// Both tanks share one fixed total, s_min + s_max, so one tank sits at a
// bound exactly when the other sits at the opposite bound.
inline PlantState nominal_state(const PlantParams& p, double cold_fraction) {
  PlantState x;
  const double total = quantize_mass(p.s_min + p.s_max);
  x.s_twc = quantize_mass(p.s_min + cold_fraction * (p.s_max - p.s_min));
  x.s_tww = total - x.s_twc;
  x.t_lw_r = 12.0;
  x.t_twc = 7.0;
  x.t_tww = 12.0;
  x.t_chw_s = 7.0;
  x.t_cw_r = 34.0;
  x.t_cw_s = 29.0;
  return x;
}

inline RlState rl_state_at(const PlantState& x, const TraceSet& t, std::size_t k) {
  RlState s;
  s.x_p = x;
  s.t_oawb = t.t_oawb.at(k);
  s.q_l_ref = t.q_l_ref.at(k);
  s.rho = t.rho.at(k);
  s.rho_bar = moving_average_price(t.rho, k);
  return s;
}

struct StepRecord {
  std::size_t k = 0;
  std::int64_t timestamp = 0;
  RlState state;
  ControlInput u;
  StepOutcome outcome;
};

using Controller = std::function<ControlInput(const RlState&)>;

struct Trajectory {
  std::vector<StepRecord> steps;
  PlantState final_state;
};

inline Trajectory simulate(const Controller& controller, const PlantState& x0, const TraceSet& traces,
                           std::size_t start, std::size_t horizon, const ProjectionSettings& ps,
                           const PlantParams& p) {
  if (start + horizon > traces.size()) throw std::out_of_range("simulation window exceeds the traces");
  Trajectory traj;
  traj.steps.reserve(horizon);
  PlantState x = x0;
  for (std::size_t i = 0; i < horizon; ++i) {
    const std::size_t k = start + i;
    StepRecord r;
    r.k = k;
    r.timestamp = traces.timestamps[k];
    r.state = rl_state_at(x, traces, k);
    r.u = controller(r.state);
    r.outcome = step(x, r.u, r.state.disturbance(), r.state.rho, ps, p);
    x = r.outcome.next_state;
    traj.steps.push_back(r);
  }
  traj.final_state = x;
  return traj;
}

struct RunSummary {
  double electricity_cost = 0.0;  // USD
  double energy_kwh = 0.0;
  double tracking_rmse_kw = 0.0;
  double tracking_relative_rmse = 0.0;  // RMSE over the mean load reference
  int chiller_switches = 0;             // steps where n_ch differs from the previous step
  int infeasible_steps = 0;
  std::size_t steps = 0;
};

inline RunSummary summarize(const Trajectory& traj, const PlantParams& p) {
  RunSummary s;
  s.steps = traj.steps.size();
  if (s.steps == 0) return s;
  double sq = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const StepRecord& r = traj.steps[i];
    s.electricity_cost += r.outcome.stage_elec_cost;
    s.energy_kwh += r.outcome.power.p_tot * p.t_s_hours();
    const double e = r.outcome.q_l - r.state.q_l_ref;
    sq += e * e;
    ref += r.state.q_l_ref;
    if (i > 0 && r.u.n_ch != traj.steps[i - 1].u.n_ch) ++s.chiller_switches;
    if (!r.outcome.feasible) ++s.infeasible_steps;
  }
  s.tracking_rmse_kw = std::sqrt(sq / s.steps);
  const double mean_ref = ref / s.steps;
  s.tracking_relative_rmse = mean_ref > 0.0 ? s.tracking_rmse_kw / mean_ref : 0.0;
  return s;
}

inline constexpr const char* kStepCsvHeader =
    "timestamp,price_usd_per_kwh,price_avg_usd_per_kwh,q_l_ref_kw,q_l_kw,q_ch_kw,p_tot_kw,p_ch_kw,p_ct_kw,"
    "p_chw_pump_kw,p_cw_pump_kw,cost_usd,s_twc_kg,s_tww_kg,n_ch,m_lw,m_tw,m_cw,m_oa,t_chw_s_c,t_cw_s_c,"
    "t_lw_r_c,feasible";

inline void write_step_csv(std::ostream& out, const Trajectory& traj) {
  out << kStepCsvHeader << '\n';
  char buf[512];
  for (const StepRecord& r : traj.steps) {
    const StepOutcome& o = r.outcome;
    const PlantState& x = r.state.x_p;
    std::snprintf(buf, sizeof buf,
                  ",%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%."
                  "9g,%.9g,%d\n",
                  r.state.rho, r.state.rho_bar, r.state.q_l_ref, o.q_l, o.q_ch, o.power.p_tot, o.power.p_ch,
                  o.power.p_ct, o.power.p_chw_pump, o.power.p_cw_pump, o.stage_elec_cost, x.s_twc, x.s_tww,
                  r.u.n_ch, r.u.m_lw, r.u.m_tw, r.u.m_cw, r.u.m_oa, x.t_chw_s, x.t_cw_s, x.t_lw_r,
                  o.feasible ? 1 : 0);
    out << format_iso8601(r.timestamp) << buf;
  }
}

}  // namespace dcep
