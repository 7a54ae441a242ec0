#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gaplab {

// Uniform grid 0 = t_0 < ... < t_n = T.
struct TimeGrid {
  double horizon_T = 1.0;
  std::size_t n_steps = 1;
  std::vector<double> nodes;

  TimeGrid() = default;
  TimeGrid(double T, std::size_t steps) : horizon_T(T), n_steps(steps) {
    if (!(T > 0.0) || steps == 0)
      throw std::invalid_argument("TimeGrid: need T > 0 and n_steps >= 1");
    nodes.resize(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
      nodes[k] = T * static_cast<double>(k) / static_cast<double>(steps);
    nodes.back() = T;
  }

  double dt(std::size_t k) const { return nodes[k + 1] - nodes[k]; }
};

}  // namespace gaplab
