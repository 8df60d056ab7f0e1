#include <cmath>

#include "tacsim/error.hpp"
#include "tacsim/geometry.hpp"
#include "tacsim/parallel.hpp"

namespace tacsim::geometry {

std::vector<mpm::Particle> ParticleCloud::to_particles() const {
  std::vector<mpm::Particle> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out[i].position = positions[i];
    out[i].mass = density * particle_volume;
    out[i].init_volume = particle_volume;
    out[i].body = body;
  }
  return out;
}

ParticleCloud sample_particles(const ShapeSpec& shape, const Pose& pose, double spacing,
                               double density) {
  shape.validate();
  if (!(spacing > 0.0)) fail(ErrorKind::Validation, "sampling spacing must be positive");
  if (!(density > 0.0)) fail(ErrorKind::Validation, "density must be positive");

  const Vec3 half = shape.half_extents();
  Vec3i lo, hi;
  for (int a = 0; a < 3; ++a) {
    const int n = static_cast<int>(std::ceil(half[a] / spacing)) + 1;
    lo[a] = -n;
    hi[a] = n;
  }
  const auto slabs = static_cast<std::size_t>(hi.z() - lo.z() + 1);
  std::vector<std::vector<Vec3>> per_slab(slabs);
  parallel_for(0, slabs, [&](std::size_t s0, std::size_t s1) {
    for (std::size_t s = s0; s < s1; ++s) {
      const double z = (lo.z() + static_cast<int>(s)) * spacing;
      for (int j = lo.y(); j <= hi.y(); ++j) {
        for (int i = lo.x(); i <= hi.x(); ++i) {
          const Vec3 local(i * spacing, j * spacing, z);
          if (sdf_eval(shape, local) <= 0.0) per_slab[s].push_back(pose.apply(local));
        }
      }
    }
  });

  ParticleCloud cloud;
  cloud.body = mpm::Body::Object;
  cloud.density = density;
  cloud.spacing = spacing;
  cloud.particle_volume = spacing * spacing * spacing;
  for (auto& slab : per_slab) {
    cloud.positions.insert(cloud.positions.end(), slab.begin(), slab.end());
  }
  if (cloud.positions.empty()) {
    fail(ErrorKind::Validation, "shape '" + std::string(to_string(shape.kind)) +
                                    "' is smaller than the sampling spacing");
  }
  return cloud;
}

ParticleCloud elastomer_block(const Vec3& extent, const Vec3i& counts, const Vec3& min_corner,
                              double density) {
  if ((counts.array() < 2).any()) {
    fail(ErrorKind::Validation, "elastomer counts must be at least 2 per axis");
  }
  if ((extent.array() <= 0.0).any()) {
    fail(ErrorKind::Validation, "elastomer extent must be positive");
  }
  const Vec3 step = extent.cwiseQuotient((counts.array() - 1).cast<double>().matrix());
  ParticleCloud cloud;
  cloud.body = mpm::Body::Elastomer;
  cloud.density = density;
  cloud.spacing = step.minCoeff();
  cloud.particle_volume = step.prod();
  cloud.counts = counts;
  cloud.positions.reserve(static_cast<std::size_t>(counts.prod()));
  for (int k = 0; k < counts.z(); ++k) {
    for (int j = 0; j < counts.y(); ++j) {
      for (int i = 0; i < counts.x(); ++i) {
        if (k == counts.z() - 1) cloud.surface_ids.push_back(cloud.positions.size());
        cloud.positions.push_back(min_corner + Vec3(i, j, k).cwiseProduct(step));
      }
    }
  }
  return cloud;
}

}  // namespace tacsim::geometry
