#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaplab/time_grid.hpp"

namespace gaplab {

// Seeded ensemble of sample paths or terminal-only samples. Replaying with
// the stored (model_id, eta, grid, seed) reproduces the batch bit-exactly.
struct TrajectoryBatch {
  std::string model_id;
  double eta = 0.0;
  std::uint64_t seed = 0;
  TimeGrid grid;
  std::size_t n = 0;
  std::size_t dim = 1;
  std::vector<double> terminal;  // n * dim, row-major
  bool has_paths = false;
  std::vector<double> paths;  // n * (steps + 1) * dim when kept

  double terminal_at(std::size_t i, std::size_t j = 0) const {
    return terminal[i * dim + j];
  }

  double path_at(std::size_t i, std::size_t step, std::size_t j = 0) const {
    if (!has_paths) throw std::logic_error("TrajectoryBatch: paths not kept");
    return paths[(i * (grid.n_steps + 1) + step) * dim + j];
  }

  // Mean and variance (population) of terminal coordinate j.
  void terminal_moments(std::size_t j, double& mean, double& var) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += terminal_at(i, j);
    mean = s / static_cast<double>(n);
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = terminal_at(i, j) - mean;
      q += d * d;
    }
    var = q / static_cast<double>(n);
  }
};

}  // namespace gaplab
