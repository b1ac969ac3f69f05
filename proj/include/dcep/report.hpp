#pragma once

// Controller comparison report: weekly cost, savings, tracking error and
// chiller switching for a challenger against the rule-based reference.

#include <cstdio>
#include <ostream>
#include <string>

#include "dcep/params.hpp"
#include "dcep/simulate.hpp"

namespace dcep {

// Positive when the challenger is cheaper than the reference.
inline double savings_percent(double reference_cost, double challenger_cost) {
  if (!(reference_cost > 0.0)) return 0.0;
  return 100.0 * (reference_cost - challenger_cost) / reference_cost;
}

struct ControllerReport {
  std::string name;
  RunSummary summary;
};

struct EvalReport {
  ControllerReport reference;   // baseline
  ControllerReport challenger;  // usually the RL policy
  std::size_t steps = 0;
  double days = 0.0;

  [[nodiscard]] double savings() const {
    return savings_percent(reference.summary.electricity_cost, challenger.summary.electricity_cost);
  }
};

inline json summary_json(const RunSummary& s) {
  return json{{"electricity_cost_usd", s.electricity_cost},
              {"energy_kwh", s.energy_kwh},
              {"tracking_rmse_kw", s.tracking_rmse_kw},
              {"tracking_relative_rmse", s.tracking_relative_rmse},
              {"chiller_switches", s.chiller_switches},
              {"infeasible_steps", s.infeasible_steps},
              {"steps", s.steps}};
}

inline json report_json(const EvalReport& r) {
  json j;
  j["steps"] = r.steps;
  j["days"] = r.days;
  j["controllers"] = json{{r.reference.name, summary_json(r.reference.summary)},
                          {r.challenger.name, summary_json(r.challenger.summary)}};
  j["reference"] = r.reference.name;
  j["challenger"] = r.challenger.name;
  j["savings_percent"] = r.savings();
  return j;
}

inline void print_summary(std::ostream& out, const std::string& name, const RunSummary& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%-9s cost %10.2f USD  energy %11.1f kWh  tracking RMSE %8.2f kW (%.2f%%)  switches %4d  "
                "infeasible steps %d\n",
                name.c_str(), s.electricity_cost, s.energy_kwh, s.tracking_rmse_kw, 100.0 * s.tracking_relative_rmse,
                s.chiller_switches, s.infeasible_steps);
  out << buf;
}

inline void print_report(std::ostream& out, const EvalReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu steps (%.2f days)\n", r.steps, r.days);
  out << buf;
  print_summary(out, r.reference.name, r.reference.summary);
  print_summary(out, r.challenger.name, r.challenger.summary);
  std::snprintf(buf, sizeof buf, "savings   %.2f%% (%s vs %s)\n", r.savings(), r.challenger.name.c_str(),
                r.reference.name.c_str());
  out << buf;
}

}  // namespace dcep
