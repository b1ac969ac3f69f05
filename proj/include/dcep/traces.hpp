#pragma once

// Disturbance and price time series: CSV ingestion, seeded synthesis, the
// trailing price average and the feature scaling vector.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcep/params.hpp"
#include "dcep/rl_state.hpp"

namespace dcep {

inline constexpr int kStepSeconds = 600;
inline constexpr int kStepsPerDay = 24 * 3600 / kStepSeconds;
inline constexpr int kPriceWindow = 24;  // 4 h of 10 min samples

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TraceSet {
  std::vector<std::int64_t> timestamps;  // seconds since the Unix epoch, UTC
  std::vector<double> t_oawb;            // degC
  std::vector<double> q_l_ref;           // kW
  std::vector<double> rho;               // USD/kWh
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t size() const { return timestamps.size(); }
};

// Mean of the `window` samples ending at k; indices before 0 repeat rho[0].
inline double moving_average_price(const std::vector<double>& rho, std::size_t k, int window = kPriceWindow) {
  if (rho.empty() || k >= rho.size()) throw std::out_of_range("price index outside the series");
  if (window < 1) throw std::invalid_argument("window must be positive");
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    const std::int64_t idx = static_cast<std::int64_t>(k) - i;
    sum += idx >= 0 ? rho[static_cast<std::size_t>(idx)] : rho.front();
  }
  return sum / window;
}

// Days-from-civil (proleptic Gregorian), after H. Hinnant's public-domain algorithm.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline bool parse_iso8601(const std::string& s, std::int64_t& out) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char tail = 0;
  const int n = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &se, &tail);
  if (n < 6 || (n == 7 && tail != 'Z')) return false;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60 || h < 0 || mi < 0 || se < 0)
    return false;
  out = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 + h * 3600 + mi * 60 + se;
  return true;
}

inline std::string format_iso8601(std::int64_t t) {
  std::int64_t days = t >= 0 ? t / 86400 : (t - 86399) / 86400;
  std::int64_t secs = t - days * 86400;
  // civil_from_days
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld", static_cast<long long>(y), m, d,
                static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

inline constexpr const char* kTraceHeader = "timestamp,t_oawb_c,q_l_ref_kw,price_usd_per_kwh";

inline TraceSet load_traces(std::istream& in, const std::string& source = "<stream>") {
  auto fail = [&](std::size_t row, const std::string& why) -> TraceError {
    return TraceError(source + ": row " + std::to_string(row) + ": " + why);
  };
  std::string line;
  if (!std::getline(in, line)) throw TraceError(source + ": empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw fail(1, "header must be exactly '" + std::string(kTraceHeader) + "'");

  TraceSet t;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 4> cells;
    std::stringstream ss(line);
    std::size_t n = 0;
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (n >= cells.size()) throw fail(row, "expected 4 columns");
      cells[n++] = cell;
    }
    if (n != cells.size()) throw fail(row, "expected 4 columns");
    std::int64_t ts = 0;
    if (!parse_iso8601(cells[0], ts)) throw fail(row, "bad ISO-8601 timestamp '" + cells[0] + "'");
    std::array<double, 3> v{};
    for (int i = 0; i < 3; ++i) {
      std::size_t used = 0;
      try {
        v[i] = std::stod(cells[i + 1], &used);
      } catch (const std::exception&) {
        throw fail(row, "not a number: '" + cells[i + 1] + "'");
      }
      if (used != cells[i + 1].size() || !std::isfinite(v[i])) throw fail(row, "not a finite number: '" + cells[i + 1] + "'");
    }
    if (v[1] < 0.0) throw fail(row, "negative load reference");
    if (!(v[2] > 0.0)) throw fail(row, "price must be positive");
    if (!t.timestamps.empty() && ts - t.timestamps.back() != kStepSeconds)
      throw fail(row, "timestamps must be spaced " + std::to_string(kStepSeconds) + " s apart");
    t.timestamps.push_back(ts);
    t.t_oawb.push_back(v[0]);
    t.q_l_ref.push_back(v[1]);
    t.rho.push_back(v[2]);
  }
  if (t.size() == 0) throw TraceError(source + ": no data rows");
  if (t.size() % kStepsPerDay != 0)
    t.warnings.push_back(source + ": " + std::to_string(t.size()) + " rows is not a whole number of days");
  return t;
}

inline TraceSet load_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file: " + path);
  return load_traces(in, path);
}

inline void write_traces(std::ostream& out, const TraceSet& t) {
  out << kTraceHeader << '\n';
  char buf[128];
  for (std::size_t k = 0; k < t.size(); ++k) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", t.t_oawb[k], t.q_l_ref[k], t.rho[k]);
    out << format_iso8601(t.timestamps[k]) << buf;
  }
}

inline void write_traces(const std::string& path, const TraceSet& t) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot write trace file: " + path);
  write_traces(out, t);
}

// Seeded synthetic traces: a wet-bulb sinusoid between 24 and 28 degC, an
// office-like cooling load between 0.5 and 5 MW and a two-peak price whose
// daily maximum is about three times its overnight minimum.
inline TraceSet synthesize_traces(std::uint64_t seed, int days) {
  if (days < 1) throw std::invalid_argument("days must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double pi = std::numbers::pi;

  TraceSet t;
  const std::int64_t start = days_from_civil(2023, 6, 5) * 86400;
  const std::size_t n = static_cast<std::size_t>(days) * kStepsPerDay;
  t.timestamps.reserve(n);
  double wb_noise = 0.0, load_noise = 0.0, price_noise = 0.0;
  for (int day = 0; day < days; ++day) {
    const double wb_mean = 26.0 + 0.6 * (unit(rng) - 0.5);
    const double wb_amp = 1.6 + 0.4 * unit(rng);
    const double load_peak = 4000.0 + 1000.0 * unit(rng);
    const double load_base = 500.0 + 300.0 * unit(rng);
    const double load_shift = 0.75 * (unit(rng) - 0.5);
    const double price_base = 0.045 + 0.01 * unit(rng);
    const double am_peak = 0.8 + 0.6 * unit(rng);
    const double pm_peak = 1.6 + 0.6 * unit(rng);
    const double am_hour = 8.0 + 1.0 * (unit(rng) - 0.5);
    const double pm_hour = 18.0 + 1.5 * (unit(rng) - 0.5);
    for (int s = 0; s < kStepsPerDay; ++s) {
      const double h = s * kStepSeconds / 3600.0;
      wb_noise = 0.95 * wb_noise + 0.05 * gauss(rng);
      load_noise = 0.9 * load_noise + 0.1 * gauss(rng);
      price_noise = 0.8 * price_noise + 0.2 * gauss(rng);

      const double wb = wb_mean + wb_amp * std::sin(2 * pi * (h - 9.0) / 24.0) + 0.3 * wb_noise;

      const double hl = h - load_shift;
      const double occupied = hl > 6.0 && hl < 21.0 ? std::pow(std::sin(pi * (hl - 6.0) / 15.0), 1.5) : 0.0;
      const double load = load_base + (load_peak - load_base) * occupied + 120.0 * load_noise;

      const double shape = 1.0 + am_peak * std::exp(-0.5 * std::pow((h - am_hour) / 1.5, 2)) +
                           pm_peak * std::exp(-0.5 * std::pow((h - pm_hour) / 2.0, 2));
      const double price = price_base * shape * (1.0 + 0.04 * price_noise);

      t.timestamps.push_back(start + static_cast<std::int64_t>(day * kStepsPerDay + s) * kStepSeconds);
      t.t_oawb.push_back(std::clamp(wb, 24.0, 28.0));
      t.q_l_ref.push_back(std::clamp(load, 500.0, 5000.0));
      t.rho.push_back(std::max(price, 0.01));
    }
  }
  return t;
}

// Positive divisors applied to [x, u] before forming quadratic features.
using ScalingVector = std::array<double, kFeatureDim>;

inline ScalingVector scaling_from_json(const json& j) {
  ScalingVector s{};
  s.fill(0.0);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const int idx = component_index(it.key());
    if (idx < 0) throw ConfigError("unknown scaling component: " + it.key());
    s[idx] = it.value();
  }
  for (int i = 0; i < kFeatureDim; ++i)
    if (!(s[i] > 0.0) || !std::isfinite(s[i]))
      throw ConfigError("scaling divisor missing or not positive: " + std::string(kComponentNames[i]));
  return s;
}

// Nominal magnitudes from the operating limits: flows by their upper bound,
// tank masses by s_max, temperatures and prices by representative levels.
inline ScalingVector nominal_scaling(const PlantParams& p, double q_l_ref_max, double rho_max) {
  ScalingVector s{};
  s[0] = p.t_lw_r.max;
  s[1] = s[2] = p.s_max;
  s[3] = s[4] = p.t_lw_r.max;
  s[5] = p.t_lw_r.max;
  s[6] = s[7] = p.t_cwr_max;
  s[8] = p.t_cws_floor;
  s[9] = q_l_ref_max;
  s[10] = s[11] = rho_max;
  s[12] = p.n_ch_max;
  s[13] = p.m_lw.max;
  s[14] = std::max(std::abs(p.m_tw.min), p.m_tw.max);
  s[15] = p.m_cw.max;
  s[16] = p.m_oa.max;
  return s;
}

}  // namespace dcep
