#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaplab/gap.hpp"
#include "gaplab/rlhf.hpp"
#include "gaplab/trajectory.hpp"

namespace gaplab {

// Shortest round-trip decimal representation; keeps CSV bodies byte-identical
// across runs and worker counts.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string method_name(GapMethod m) {
  return m == GapMethod::Analytic ? "analytic" : "monte_carlo";
}

inline nlohmann::json gap_report_json(const GapReport& r,
                                      nlohmann::json params = {}) {
  nlohmann::json j;
  j["j_ref"] = r.j_ref;
  j["j_sde"] = r.j_sde;
  j["j_ode"] = r.j_ode;
  j["delta"] = r.delta;
  j["signed_gap"] = r.signed_gap;
  j["improvement"] = r.improvement;
  j["bound"] = r.bound_value;
  j["bound_satisfied"] = r.bound_satisfied;
  j["se_ref"] = r.se_ref;
  j["se_sde"] = r.se_sde;
  j["se_ode"] = r.se_ode;
  j["se_delta"] = r.se_delta;
  j["method"] = method_name(r.method);
  j["params"] = std::move(params);
  return j;
}

inline nlohmann::json batch_metadata_json(const TrajectoryBatch& b) {
  nlohmann::json j;
  j["model"] = b.model_id;
  j["eta"] = b.eta;
  j["seed"] = b.seed;
  j["n"] = b.n;
  j["dim"] = b.dim;
  j["grid"] = {{"T", b.grid.horizon_T}, {"n_steps", b.grid.n_steps}};
  j["has_paths"] = b.has_paths;
  return j;
}

// CSV layout: one row per (trajectory, dimension) terminal value.
inline void write_batch_csv(const TrajectoryBatch& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "trajectory,dimension,value\n";
  for (std::size_t i = 0; i < b.n; ++i)
    for (std::size_t j = 0; j < b.dim; ++j)
      out << i << ',' << j << ',' << format_double(b.terminal_at(i, j)) << '\n';
}

// Flat little-endian binary of the terminal block; metadata goes in the JSON
// sidecar written next to it.
inline void write_batch_binary(const TrajectoryBatch& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.write(reinterpret_cast<const char*>(b.terminal.data()),
            static_cast<std::streamsize>(b.terminal.size() * sizeof(double)));
  std::ofstream side(path + ".json", std::ios::binary);
  if (!side) throw std::runtime_error("cannot open " + path + ".json");
  side << batch_metadata_json(b).dump(2) << '\n';
}

inline std::string training_csv_header() {
  return "iter,theta,j_sde,j_ode,gap,grad_norm,seconds";
}

inline std::string training_csv_row(const IterRecord& rec,
                                    bool deterministic_seconds = false) {
  std::string theta;
  for (std::size_t j = 0; j < rec.theta.size(); ++j) {
    if (j) theta += ';';
    theta += format_double(rec.theta[j]);
  }
  // wall-clock is non-deterministic; reports that must be byte-stable zero it
  const double secs = deterministic_seconds ? 0.0 : rec.seconds;
  return std::to_string(rec.iter) + ',' + theta + ',' + format_double(rec.j_sde) +
         ',' + format_double(rec.j_ode) + ',' + format_double(rec.gap) + ',' +
         format_double(rec.grad_norm) + ',' + format_double(secs);
}

}  // namespace gaplab
