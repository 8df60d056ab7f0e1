#pragma once

// Indenter shapes as signed distance functions, lattice sampling of shapes
// into particle clouds, and the elastomer block.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tacsim/mpm.hpp"
#include "tacsim/types.hpp"

namespace tacsim::geometry {

enum class ShapeKind { Sphere, Cylinder, Torus, Prism, Moon, Pacman, DotIn };

std::string_view to_string(ShapeKind kind);
// Throws a validation error listing the known kinds.
ShapeKind parse_shape_kind(std::string_view name);

// Dimensions in mm. Which fields apply depends on `kind`:
//   Sphere    radius
//   Cylinder  radius, height
//   Torus     radius (major), minor_radius
//   Prism     size (full extents)
//   Moon      radius, height, cut_radius, cut_offset (disc minus offset disc)
//   Pacman    radius, height, mouth_deg (disc minus a wedge opening to +x)
//   DotIn     radius, height, inner_radius (disc minus centered disc)
// Extruded kinds are centered on the origin with their axis along z.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Sphere;
  double radius = 4.0;
  double height = 6.0;
  double minor_radius = 1.0;
  double inner_radius = 1.5;
  double cut_radius = 3.5;
  double cut_offset = 2.5;
  double mouth_deg = 90.0;
  Vec3 size{4.0, 4.0, 4.0};
  double edge_round_radius = 0.5;

  void validate() const;
  // Half extents of the local bounding box.
  Vec3 half_extents() const;
};

// Rigid placement: rotation about +z (degrees), then translation.
struct Pose {
  Vec3 translation = Vec3::Zero();
  double rotation_deg = 0.0;

  Vec3 apply(const Vec3& local) const;
};

// Maps an angle to (-180, 180].
double normalize_degrees(double deg);

double sdf_eval(const ShapeSpec& shape, const Vec3& point);

struct ParticleCloud {
  std::vector<Vec3> positions;
  double particle_volume = 0.0;  // mm^3
  double density = 1.0;          // mass units per mm^3
  mpm::Body body = mpm::Body::Object;
  double spacing = 0.0;
  // Elastomer only: indices of the top lattice layer and lattice counts.
  std::vector<std::size_t> surface_ids;
  Vec3i counts = Vec3i::Zero();

  std::size_t size() const { return positions.size(); }
  std::vector<mpm::Particle> to_particles() const;
};

// Lattice of step `spacing` anchored at the shape's local origin, kept where
// sdf <= 0, then posed. Throws a validation error for an empty cloud.
ParticleCloud sample_particles(const ShapeSpec& shape, const Pose& pose, double spacing,
                               double density = 1.0);

// counts.x * counts.y * counts.z particles spanning `extent` from `min_corner`.
ParticleCloud elastomer_block(const Vec3& extent, const Vec3i& counts,
                              const Vec3& min_corner = Vec3::Zero(), double density = 1.0);

}  // namespace tacsim::geometry
