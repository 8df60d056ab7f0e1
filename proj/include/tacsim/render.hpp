#pragma once

// Tactile image rendering: a unidirectional path tracer over triangle scenes
// (next-event estimation + MIS, Lambertian surfaces, rectangular LED
// emitters) and a Phong baseline without shadows or interreflection.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tacsim/surface.hpp"
#include "tacsim/types.hpp"

namespace tacsim::render {

using Color = Eigen::Array3d;

// 8-bit RGB, row-major, row 0 at the top.
struct Image {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image() = default;
  Image(std::uint32_t w, std::uint32_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t& at(std::uint32_t x, std::uint32_t y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(std::uint32_t x, std::uint32_t y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool operator==(const Image&) const = default;
};

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> bytes);
void save_png(const std::filesystem::path& path, const Image& image);
Image load_png(const std::filesystem::path& path);

// Linear radiance per pixel before tone mapping.
struct RadianceImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<Color> pixels;
  Color mean() const;
};

// Albedo texture in [0, 1]. UV (0,0) is the bottom-left texel center and
// (1,1) the top-right one; lookups snap to the nearest texel.
class Texture {
 public:
  Texture() = default;
  explicit Texture(const Image& image);
  static Texture constant(const Color& albedo);

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  Color sample(const Vec2& uv) const;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<Color> texels_;
};

// Rectangle c0-c1-c2-c3 emitting from the side (c1 - c0) x (c3 - c0) faces.
struct AreaLight {
  std::array<Vec3, 4> corners;
  Color rgb{255.0, 255.0, 255.0};

  Vec3 center() const { return 0.25 * (corners[0] + corners[1] + corners[2] + corners[3]); }
  Vec3 normal() const;
};

struct Camera {
  Vec3 position{0.0, 0.0, 10.0};
  Vec3 forward{0.0, 0.0, -1.0};
  Vec3 up{0.0, 1.0, 0.0};
  double vfov_deg = 40.0;
};

struct PhongParams {
  double ambient = 0.1;
  double diffuse = 1.0;
  double specular = 0.2;
  double shininess = 16.0;
  double light_scale = 0.6;  // multiplies rgb / 255
};

struct SensorProfile {
  std::string name;
  std::uint32_t width = 640;
  std::uint32_t height = 480;
  double pixel_pitch = 0.025;  // mm per depth/mesh sample
  double camera_height = 20.0;  // mm above the undeformed surface
  Camera camera;
  std::vector<AreaLight> lights;
  double light_scale = 1.0;  // emitted radiance = light_scale * rgb / 255
  double exposure = 1.0;
  bool gamma = false;
  double roughness = 1.0;  // fixed: pure Lambertian
  PhongParams phong;
};

// Named presets: "gelsight" (640x480, red/green/blue/white edge strips) and
// "slip-sensor" (480x480, white strips). The camera and LED strips are laid
// out for a mesh of width x height samples at `pixel_pitch`.
std::vector<std::string> profile_names();
SensorProfile make_profile(std::string_view name);
SensorProfile make_profile(std::string_view name, std::uint32_t width, std::uint32_t height,
                           double pixel_pitch);
// Re-derives camera and light placement after a resolution/pitch change.
void layout_profile(SensorProfile& profile);

struct Material {
  Color albedo{0.0, 0.0, 0.0};
  int texture = -1;  // index into Scene textures, overrides albedo
  Color emission{0.0, 0.0, 0.0};
  bool emission_from_texture = false;  // test-only emissive override
};

class Bvh;

class Scene {
 public:
  Scene();
  ~Scene();
  Scene(Scene&&) noexcept;
  Scene& operator=(Scene&&) noexcept;

  int add_texture(Texture texture);
  int add_material(const Material& material);
  // Triangles take optional per-vertex normals and UVs.
  void add_triangle(const std::array<Vec3, 3>& p, int material,
                    const std::array<Vec3, 3>* normals = nullptr,
                    const std::array<Vec2, 3>* uvs = nullptr);
  // The heightfield plus a one-cell skirt repeating its border outward.
  void add_mesh(const surface::HeightfieldMesh& mesh, int material);
  // Adds the emitter geometry and registers the light for the Phong model.
  void add_light(const AreaLight& light, double light_scale);

  // Builds acceleration and light-sampling tables; call after adding geometry.
  void finalize();

  Camera camera;
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  double exposure = 1.0;
  bool gamma = false;
  PhongParams phong;

  struct Triangle {
    std::array<Vec3, 3> p;
    std::array<Vec3, 3> n;
    std::array<Vec2, 3> uv;
    Vec3 geometric_normal;  // unit, from the winding
    double area = 0.0;
    int material = 0;
  };
  struct Hit {
    double t = 0.0;
    std::uint32_t triangle = 0;
    double b1 = 0.0, b2 = 0.0;  // barycentrics of p[1], p[2]
  };

  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Material>& materials() const { return materials_; }
  const std::vector<Texture>& textures() const { return textures_; }
  const std::vector<std::pair<AreaLight, double>>& lights() const { return lights_; }
  const std::vector<std::uint32_t>& emitters() const { return emitters_; }
  const std::vector<double>& emitter_cdf() const { return emitter_cdf_; }
  double emitter_pick_probability(std::uint32_t triangle) const;

  bool intersect(const Vec3& origin, const Vec3& dir, double t_max, Hit& hit) const;
  bool occluded(const Vec3& origin, const Vec3& dir, double t_max) const;

  Color albedo_at(const Triangle& tri, const Hit& hit) const;
  Color emission_at(const Triangle& tri, const Hit& hit) const;

 private:
  std::vector<Triangle> triangles_;
  std::vector<Material> materials_;
  std::vector<Texture> textures_;
  std::vector<std::pair<AreaLight, double>> lights_;
  std::vector<std::uint32_t> emitters_;
  std::vector<double> emitter_cdf_;
  std::vector<double> emitter_prob_;  // per triangle, 0 for non-emitters
  std::unique_ptr<Bvh> bvh_;
};

// Heightfield with the UV-wrapped base texture, LED strips and the camera of
// the sensor profile. Throws on an empty texture or degenerate camera.
Scene build_scene(const surface::HeightfieldMesh& mesh, const Image& texture,
                  const SensorProfile& profile);

struct RenderSettings {
  int samples_per_pixel = 128;
  int max_bounces = 4;
  std::uint64_t seed = 0;
  bool jitter = true;         // sub-pixel jitter of camera rays
  int roulette_start = 3;     // Russian roulette after this many bounces
};

struct RenderStats {
  std::uint64_t rejected_samples = 0;  // non-finite radiance samples dropped
};

RadianceImage render_radiance(const Scene& scene, const RenderSettings& settings,
                              RenderStats* stats = nullptr);
Image tone_map(const RadianceImage& radiance, double exposure, bool gamma);
Image render_path_traced(const Scene& scene, int samples_per_pixel, int max_bounces,
                         std::uint64_t seed);
Image render_path_traced(const Scene& scene, const RenderSettings& settings,
                         RenderStats* stats = nullptr);

RadianceImage render_phong_radiance(const Scene& scene);
Image render_phong(const Scene& scene);

}  // namespace tacsim::render
