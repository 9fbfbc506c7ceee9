#pragma once

#include <cstddef>
#include <vector>

#include "mapod/data.hpp"

namespace mapod {

// Largest dimension covered by the built-in direction-number table.
inline constexpr std::size_t kMaxSobolDimension = 21;

struct UnitHypercubeDesign {
  std::size_t dim = 0;
  std::size_t n = 0;
  std::vector<double> points;  // row-major n x dim, each in [0,1)

  double at(std::size_t i, std::size_t j) const { return points[i * dim + j]; }
};

// Unscrambled Sobol' points with Joe-Kuo direction numbers, generated in
// Gray-code order. Index 0 (the origin) is never emitted; the first point
// returned has index `start` (>= 1).
UnitHypercubeDesign sobol_sequence(std::size_t dim, std::size_t n, std::size_t start = 1);

// Maps the first n Sobol' points through the input laws, one coordinate per
// input in declaration order. When the set has second-flaw inputs, even rows
// get one flaw (second-flaw cells absent) and odd rows two.
SimulationDataset sample_inputs(const InputSet& inputs, std::size_t n);

}  // namespace mapod
