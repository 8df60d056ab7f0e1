#pragma once

// Deformed elastomer surface -> depth raster -> UV-mapped heightfield mesh.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tacsim/types.hpp"

namespace tacsim::surface {

// Depth below the undeformed surface in mm, positive into the gel.
struct DepthMap {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  double pixel_pitch = 0.0;  // mm per pixel
  std::vector<double> values;  // row-major, width * height

  double at(std::uint32_t i, std::uint32_t j) const { return values[j * width + i]; }
  double& at(std::uint32_t i, std::uint32_t j) { return values[j * width + i]; }
  double max_value() const;
};

// Placement of the raster in the simulation's xy plane.
struct RasterSpec {
  std::uint32_t width = 160;
  std::uint32_t height = 120;
  double pitch = 0.1;
  Vec2 center = Vec2::Zero();

  Vec2 pixel_position(std::uint32_t i, std::uint32_t j) const {
    return center + pitch * Vec2(i - 0.5 * (width - 1.0), j - 0.5 * (height - 1.0));
  }
};

// Piecewise-linear interpolation of (rest_z - z) over the Delaunay
// triangulation of the surface particles' current (x, y); pixels outside the
// hull take the nearest particle's depth. `current[k]` and `rest[k]` describe
// the same tracked surface particle.
DepthMap extract_surface_depth(std::span<const Vec3> current, std::span<const Vec3> rest,
                               const RasterSpec& raster);

// Adds uniform noise in [-amplitude, amplitude] from a generator seeded with
// `seed`, in row-major order.
DepthMap perturb_depth(const DepthMap& depth, double amplitude, std::uint64_t seed);

struct HeightfieldMesh {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<Vec3> vertices;
  std::vector<Vec2> uvs;
  std::vector<Vec3> normals;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

HeightfieldMesh depth_to_mesh(const DepthMap& depth);

// "DPTH" file: u32 width, u32 height, f32 pitch, f32 values. Saving
// quantizes to f32; `quantize` applies the same rounding in memory.
DepthMap quantize(const DepthMap& depth);
std::vector<std::uint8_t> encode_depth(const DepthMap& depth);
DepthMap decode_depth(std::span<const std::uint8_t> bytes);
void save_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap load_depth(const std::filesystem::path& path);

// Wavefront OBJ with v/vt/vn/f records.
std::string mesh_to_obj(const HeightfieldMesh& mesh);
void save_obj(const std::filesystem::path& path, const HeightfieldMesh& mesh);

}  // namespace tacsim::surface
