#pragma once

#include "tacsim/mpm.hpp"

namespace tacsim::mpm::detail {

struct StencilPoint {
  Vec3i base;  // first node of the 3x3x3 stencil
  Vec3 fx;     // position relative to base, in cells, in [0.5, 1.5)
  StencilWeights w;
};

// Throws SimulationFault when the stencil leaves the grid.
StencilPoint locate(const Vec3& position, const SimConfig& cfg, std::size_t id);

}  // namespace tacsim::mpm::detail
