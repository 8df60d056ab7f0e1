#include <cmath>

#include <Eigen/LU>

#include "tacsim/error.hpp"
#include "tacsim/mpm.hpp"

namespace tacsim::mpm {

double MaterialParams::mu() const {
  return youngs_modulus / (2.0 * (1.0 + poisson_ratio));
}

double MaterialParams::lambda() const {
  return youngs_modulus * poisson_ratio /
         ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
}

void MaterialParams::validate() const {
  if (!(youngs_modulus > 0.0) || !std::isfinite(youngs_modulus)) {
    fail(ErrorKind::Validation, "youngs_modulus must be positive");
  }
  if (!(poisson_ratio > 0.0 && poisson_ratio < 0.5)) {
    fail(ErrorKind::Validation, "poisson_ratio must lie in (0, 0.5)");
  }
}

// Newton iteration X <- (g X + X^-T / g) / 2 towards the orthogonal polar
// factor. The norm scaling g only pays off far from convergence, and once a
// step changes X by less than 1e-6 the quadratic rate means one more
// unscaled step reaches machine precision.
Mat3 polar_rotation(const Mat3& f) {
  Mat3 x = f;
  for (int it = 0; it < 60; ++it) {
    const Mat3 inv_t = x.inverse().transpose();
    const double change = (x - inv_t).cwiseAbs().maxCoeff();
    if (change < 1e-6) {
      x = 0.5 * (x + inv_t);
      const Mat3 last = x.inverse().transpose();
      return 0.5 * (x + last);
    }
    if (change > 1e-2) {
      const double g = std::sqrt(inv_t.norm() / x.norm());
      x = 0.5 * (g * x + inv_t / g);
    } else {
      x = 0.5 * (x + inv_t);
    }
  }
  return x;
}

Mat3 compute_stress(const Mat3& f, const MaterialParams& m, std::size_t id) {
  if (!f.allFinite()) throw SimulationFault("non-finite deformation gradient", id);
  const double j = f.determinant();
  if (!(j > 0.0)) throw SimulationFault("inverted deformation gradient (J <= 0)", id);
  const Mat3 r = polar_rotation(f);
  Mat3 s = 2.0 * m.mu() * (f - r) * f.transpose();
  s.diagonal().array() += m.lambda() * j * (j - 1.0);
  return s;
}

}  // namespace tacsim::mpm
