#include <cmath>

#include "tacsim/mpm.hpp"

namespace tacsim::mpm {

double bspline(double x) {
  const double a = std::abs(x);
  if (a < 0.5) return 0.75 - a * a;
  if (a < 1.5) return 0.5 * (1.5 - a) * (1.5 - a);
  return 0.0;
}

StencilWeights kernel_weight(const Vec3& offset) {
  // fx is the distance from the first stencil node, in [0.5, 1.5).
  const Vec3 fx = offset.array() + 1.0;
  StencilWeights w;
  w[0] = 0.5 * (1.5 - fx.array()).square();
  w[1] = 0.75 - (fx.array() - 1.0).square();
  w[2] = 0.5 * (fx.array() - 0.5).square();
  return w;
}

}  // namespace tacsim::mpm
