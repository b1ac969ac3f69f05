#pragma once

// Flat text checkpoint for a trained Q-function:
//
//   dcep-checkpoint 1
//   config_hash <16 hex digits>
//   scaling <17 values>
//   offset <17 values>
//   support <d entries i:j>
//   theta <d values>
//
// Values are written with 17 significant digits so a round trip is exact.
// Nothing time- or machine-dependent is written, so identical training runs
// produce byte-identical files.

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dcep/qlearn.hpp"

namespace dcep {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  QuadraticQ q;
  std::uint64_t config_hash = 0;
};

inline constexpr const char* kCheckpointMagic = "dcep-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016" PRIx64, c.config_hash);
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "config_hash " << hash << '\n';
  out << "scaling";
  for (double s : c.q.scaling) out << ' ' << format_double(s);
  out << "\noffset";
  for (double o : c.q.offset) out << ' ' << format_double(o);
  out << "\nsupport";
  for (const auto& [i, j] : c.q.support) out << ' ' << i << ':' << j;
  out << "\ntheta";
  for (int l = 0; l < c.q.size(); ++l) out << ' ' << format_double(c.q.theta[l]);
  out << '\n';
}

inline void write_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  write_checkpoint(out, c);
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

inline Checkpoint read_checkpoint(std::istream& in) {
  auto line_for = [&in](const char* key) {
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError(std::string("checkpoint truncated before ") + key);
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw CheckpointError(std::string("expected '") + key + "' line, found '" + k + "'");
    std::string rest;
    std::getline(ls, rest);
    return rest;
  };
  Checkpoint c;
  {
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError("empty checkpoint");
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != kCheckpointMagic || version != kCheckpointVersion)
      throw CheckpointError("not a version-1 checkpoint");
  }
  {
    std::istringstream ls(line_for("config_hash"));
    std::string hex;
    ls >> hex;
    try {
      c.config_hash = std::stoull(hex, nullptr, 16);
    } catch (const std::exception&) {
      throw CheckpointError("malformed config hash");
    }
  }
  {
    std::istringstream ls(line_for("scaling"));
    for (double& s : c.q.scaling)
      if (!(ls >> s) || !(s > 0.0)) throw CheckpointError("scaling must hold 17 positive values");
  }
  {
    std::istringstream ls(line_for("offset"));
    for (double& o : c.q.offset)
      if (!(ls >> o) || !std::isfinite(o)) throw CheckpointError("offset must hold 17 finite values");
  }
  {
    std::istringstream ls(line_for("support"));
    std::string tok;
    while (ls >> tok) {
      int i = -1, j = -1;
      char colon = 0;
      std::istringstream ts(tok);
      if (!(ts >> i >> colon >> j) || colon != ':' || i < 0 || j < i || j >= kFeatureDim)
        throw CheckpointError("malformed support entry: " + tok);
      c.q.support.emplace_back(i, j);
    }
    if (c.q.support.empty()) throw CheckpointError("empty support");
  }
  {
    std::istringstream ls(line_for("theta"));
    c.q.theta.resize(c.q.size());
    for (int l = 0; l < c.q.size(); ++l)
      if (!(ls >> c.q.theta[l])) throw CheckpointError("theta has fewer values than the support");
    double extra = 0.0;
    if (ls >> extra) throw CheckpointError("theta has more values than the support");
  }
  return c;
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace dcep
