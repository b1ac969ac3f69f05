#pragma once

// Plant coefficients, operating limits and the configuration file loader.
//
// Every empirical coefficient comes from the configuration file
// (config/default.json ships with the repository). The structs below carry
// no coefficient defaults of their own; a default-constructed PlantParams is
// invalid until loaded.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace dcep {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Range {
  double min = 0.0;
  double max = 0.0;

  [[nodiscard]] double clamp(double v) const { return v < min ? min : (v > max ? max : v); }
  [[nodiscard]] bool contains(double v) const { return v >= min && v <= max; }
  [[nodiscard]] double mid() const { return 0.5 * (min + max); }
};

struct PlantParams {
  double c_pw = 0.0;          // kJ/(kg K)
  double rho_w = 0.0;         // kg/m^3
  double t_s = 0.0;           // s per step
  int n_ch_max = 0;
  double m_indv = 0.0;        // kg/s through each running chiller
  double q_rated_indv = 0.0;  // kW per chiller
  double eta1 = 0.0;          // compressor waste heat fraction reaching the condenser

  std::array<double, 3> beta{};   // chiller power
  std::array<double, 4> alpha{};  // chilled-water pumps, on m_chw
  std::array<double, 4> gamma{};  // cooling-water pumps, on m_cw
  double lambda = 0.0;            // cooling-tower fan, kW/(kg/s)^3
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;

  double t_chws_min = 0.0;
  double t_cwr_max = 0.0;
  Range t_lw_r{};  // load-water return window
  double s_min = 0.0, s_max = 0.0;  // kg, per tank

  Range m_lw{}, m_tw{}, m_cw{}, m_oa{};

  // Input-set window on the next cooling-water supply temperature:
  // max(floor, t_oawb + margin) <= t_cw_s' <= min(t_cw_r, ceiling).
  double t_cws_floor = 0.0;
  double t_cws_ceiling = 0.0;
  double t_cws_wetbulb_margin = 0.0;
  // Approach of the cooling-tower outlet over the wet-bulb inside the plant model.
  double t_cws_approach = 0.0;

  [[nodiscard]] double t_s_hours() const { return t_s / 3600.0; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string("plant parameter must be positive and finite: ") + name);
    };
    positive(c_pw, "c_pw");
    positive(rho_w, "rho_w");
    positive(t_s, "t_s");
    positive(m_indv, "m_indv");
    positive(q_rated_indv, "q_rated_indv");
    positive(eta1, "eta1");
    positive(lambda, "lambda");
    positive(c1, "c1");
    positive(c2, "c2");
    positive(c3, "c3");
    positive(s_min, "s_min");
    if (n_ch_max < 1) throw ConfigError("n_ch_max must be at least 1");
    if (!(s_min < s_max)) throw ConfigError("s_min must be below s_max");
    if (!(t_lw_r.min < t_lw_r.max)) throw ConfigError("t_lw_r window is empty");
    for (const auto* r : {&m_lw, &m_cw, &m_oa}) {
      if (!(r->min > 0.0) || !(r->min <= r->max)) throw ConfigError("flow bounds must satisfy 0 < min <= max");
    }
    if (!(m_tw.min <= 0.0 && m_tw.max >= 0.0)) throw ConfigError("m_tw bounds must bracket zero");
  }
};

// Target and weights of the implicit plant step. The load component of the
// target is always the current load reference.
struct ProjectionSettings {
  enum class Solver { Interval, AugmentedLagrangian };

  double t_chw_s_target = 0.0;
  double t_cw_s_target = 0.0;
  std::array<double, 3> weights{};  // diagonal of A over [t_chw_s, t_cw_s, q_l]
  Solver solver = Solver::Interval;
  int al_outer = 200;
  int al_inner = 100;
  int al_starts = 5;
  double al_tolerance = 1e-9;
  std::uint64_t al_seed = 0;
};

struct BaselineSettings {
  double coil_supply_c = 7.0;
  double coil_return_c = 12.0;
  double condenser_delta_t = 5.0;
  double m_oa_tolerance = 1e-3;
};

inline PlantParams plant_params_from_json(const json& j) {
  PlantParams p;
  try {
    const json& pl = j.at("plant");
    p.c_pw = pl.at("c_pw");
    p.rho_w = pl.at("rho_w");
    p.t_s = pl.at("t_s_seconds");
    p.n_ch_max = pl.at("n_ch_max");
    p.m_indv = pl.at("m_indv");
    p.q_rated_indv = pl.at("q_rated_indv");
    p.eta1 = pl.at("eta1");
    p.beta = pl.at("beta").get<std::array<double, 3>>();
    p.alpha = pl.at("alpha").get<std::array<double, 4>>();
    p.gamma = pl.at("gamma").get<std::array<double, 4>>();
    p.lambda = pl.at("lambda");
    p.c1 = pl.at("c1");
    p.c2 = pl.at("c2");
    p.c3 = pl.at("c3");
    p.t_chws_min = pl.at("t_chws_min");
    p.t_cwr_max = pl.at("t_cwr_max");
    p.t_lw_r = {pl.at("t_lw_r_min"), pl.at("t_lw_r_max")};
    p.t_cws_floor = pl.at("t_cws_floor");
    p.t_cws_ceiling = pl.at("t_cws_ceiling");
    p.t_cws_wetbulb_margin = pl.at("t_cws_wetbulb_margin");
    p.t_cws_approach = pl.at("t_cws_approach");
    const double rho_w = p.rho_w;
    p.s_min = double(pl.at("tes_volume_min_m3")) * rho_w;
    p.s_max = double(pl.at("tes_volume_max_m3")) * rho_w;
    const json& b = j.at("bounds");
    auto range = [&](const char* key) { return Range{b.at(key).at(0), b.at(key).at(1)}; };
    p.m_lw = range("m_lw");
    p.m_tw = range("m_tw");
    p.m_cw = range("m_cw");
    p.m_oa = range("m_oa");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("plant configuration: ") + e.what());
  }
  p.validate();
  return p;
}

inline ProjectionSettings projection_settings_from_json(const json& j) {
  ProjectionSettings s;
  try {
    const json& pj = j.at("projection");
    s.t_chw_s_target = pj.at("t_chw_s_target");
    s.t_cw_s_target = pj.at("t_cw_s_target");
    const double q_scale = pj.at("q_scale_kw");
    s.weights = {pj.at("weight_t_chw_s"), pj.at("weight_t_cw_s"), double(pj.at("weight_q_l")) / (q_scale * q_scale)};
    const std::string solver = pj.value("solver", "interval");
    if (solver == "interval") {
      s.solver = ProjectionSettings::Solver::Interval;
    } else if (solver == "augmented_lagrangian") {
      s.solver = ProjectionSettings::Solver::AugmentedLagrangian;
    } else {
      throw ConfigError("unknown projection solver: " + solver);
    }
    s.al_outer = pj.value("al_outer", 200);
    s.al_inner = pj.value("al_inner", 100);
    s.al_starts = pj.value("al_starts", 5);
    s.al_tolerance = pj.value("al_tolerance", 1e-9);
    s.al_seed = pj.value("al_seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("projection configuration: ") + e.what());
  }
  for (double w : s.weights)
    if (!(w > 0.0)) throw ConfigError("projection weights must be positive");
  return s;
}

inline BaselineSettings baseline_settings_from_json(const json& j) {
  BaselineSettings s;
  if (!j.contains("baseline")) return s;
  const json& b = j.at("baseline");
  s.coil_supply_c = b.value("coil_supply_c", s.coil_supply_c);
  s.coil_return_c = b.value("coil_return_c", s.coil_return_c);
  s.condenser_delta_t = b.value("condenser_delta_t", s.condenser_delta_t);
  s.m_oa_tolerance = b.value("m_oa_tolerance", s.m_oa_tolerance);
  return s;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file: " + path);
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError("malformed configuration file " + path + ": " + e.what());
  }
}

// FNV-1a over the canonical dump; stable across runs and platforms.
inline std::uint64_t config_hash(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dcep
