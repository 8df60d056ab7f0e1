#include <algorithm>
#include <cmath>

#include "render/bvh.hpp"
#include "tacsim/error.hpp"
#include "tacsim/render.hpp"

namespace tacsim::render {

Color RadianceImage::mean() const {
  Color sum = Color::Zero();
  for (const auto& c : pixels) sum += c;
  return pixels.empty() ? sum : Color(sum / static_cast<double>(pixels.size()));
}

Texture::Texture(const Image& image) : width_(image.width), height_(image.height) {
  if (image.width == 0 || image.height == 0) fail(ErrorKind::Validation, "texture is empty");
  texels_.resize(static_cast<std::size_t>(width_) * height_);
  for (std::uint32_t y = 0; y < height_; ++y) {
    for (std::uint32_t x = 0; x < width_; ++x) {
      texels_[y * width_ + x] =
          Color(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2)) / 255.0;
    }
  }
}

Texture Texture::constant(const Color& albedo) {
  Texture t;
  t.width_ = 1;
  t.height_ = 1;
  t.texels_.assign(1, albedo);
  return t;
}

Color Texture::sample(const Vec2& uv) const {
  const double u = std::clamp(uv.x(), 0.0, 1.0);
  const double v = std::clamp(uv.y(), 0.0, 1.0);
  const auto x = static_cast<std::uint32_t>(std::lround(u * (width_ - 1)));
  const auto y = static_cast<std::uint32_t>(std::lround((1.0 - v) * (height_ - 1)));
  return texels_[y * width_ + x];
}

Vec3 AreaLight::normal() const {
  return (corners[1] - corners[0]).cross(corners[3] - corners[0]).normalized();
}

Scene::Scene() = default;
Scene::~Scene() = default;
Scene::Scene(Scene&&) noexcept = default;
Scene& Scene::operator=(Scene&&) noexcept = default;

int Scene::add_texture(Texture texture) {
  if (texture.width() == 0 || texture.height() == 0) {
    fail(ErrorKind::Validation, "texture is empty");
  }
  textures_.push_back(std::move(texture));
  return static_cast<int>(textures_.size() - 1);
}

int Scene::add_material(const Material& material) {
  if (material.texture >= static_cast<int>(textures_.size())) {
    fail(ErrorKind::Validation, "material references a missing texture");
  }
  materials_.push_back(material);
  return static_cast<int>(materials_.size() - 1);
}

void Scene::add_triangle(const std::array<Vec3, 3>& p, int material,
                         const std::array<Vec3, 3>* normals, const std::array<Vec2, 3>* uvs) {
  if (material < 0 || material >= static_cast<int>(materials_.size())) {
    fail(ErrorKind::Validation, "triangle references a missing material");
  }
  Triangle t;
  t.p = p;
  const Vec3 cross = (p[1] - p[0]).cross(p[2] - p[0]);
  t.area = 0.5 * cross.norm();
  t.geometric_normal = t.area > 0.0 ? Vec3(cross.normalized()) : Vec3::UnitZ();
  if (normals) {
    t.n = *normals;
  } else {
    t.n = {t.geometric_normal, t.geometric_normal, t.geometric_normal};
  }
  if (uvs) {
    t.uv = *uvs;
  } else {
    t.uv = {Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
  }
  t.material = material;
  triangles_.push_back(t);
  bvh_.reset();
}

void Scene::add_mesh(const surface::HeightfieldMesh& mesh, int material) {
  for (const auto& tri : mesh.triangles) {
    const std::array<Vec3, 3> p{mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]};
    const std::array<Vec3, 3> n{mesh.normals[tri[0]], mesh.normals[tri[1]], mesh.normals[tri[2]]};
    const std::array<Vec2, 3> uv{mesh.uvs[tri[0]], mesh.uvs[tri[1]], mesh.uvs[tri[2]]};
    add_triangle(p, material, &n, &uv);
  }
  // One-cell skirt that repeats the border vertices outward. Border pixel
  // centres sit exactly on the mesh edge; without it, rays through the outer
  // half of those pixels would miss the gel.
  const auto w = static_cast<int>(mesh.width), h = static_cast<int>(mesh.height);
  if (w < 2 || h < 2 || mesh.vertices.size() != static_cast<std::size_t>(w) * h) return;
  const double px = mesh.vertices[1].x() - mesh.vertices[0].x();
  const double py = mesh.vertices[w].y() - mesh.vertices[0].y();
  auto corner = [&](int i, int j, Vec3& p, Vec3& n, Vec2& uv) {
    const int ci = std::clamp(i, 0, w - 1), cj = std::clamp(j, 0, h - 1);
    const std::size_t k = static_cast<std::size_t>(cj) * w + ci;
    p = mesh.vertices[k] + Vec3((i - ci) * px, (j - cj) * py, 0.0);
    n = mesh.normals[k];
    uv = mesh.uvs[k];
  };
  for (int j = -1; j < h; ++j) {
    for (int i = -1; i < w; ++i) {
      if (i >= 0 && j >= 0 && i + 1 < w && j + 1 < h) continue;
      std::array<Vec3, 4> p, n;
      std::array<Vec2, 4> uv;
      corner(i, j, p[0], n[0], uv[0]);
      corner(i + 1, j, p[1], n[1], uv[1]);
      corner(i + 1, j + 1, p[2], n[2], uv[2]);
      corner(i, j + 1, p[3], n[3], uv[3]);
      for (const auto& t : {std::array<int, 3>{0, 1, 2}, std::array<int, 3>{0, 2, 3}}) {
        const std::array<Vec3, 3> tp{p[t[0]], p[t[1]], p[t[2]]};
        const std::array<Vec3, 3> tn{n[t[0]], n[t[1]], n[t[2]]};
        const std::array<Vec2, 3> tuv{uv[t[0]], uv[t[1]], uv[t[2]]};
        add_triangle(tp, material, &tn, &tuv);
      }
    }
  }
}

void Scene::add_light(const AreaLight& light, double light_scale) {
  Material m;
  m.emission = light.rgb / 255.0 * light_scale;
  const int id = add_material(m);
  const auto& c = light.corners;
  add_triangle({c[0], c[1], c[2]}, id);
  add_triangle({c[0], c[2], c[3]}, id);
  lights_.emplace_back(light, light_scale);
}

void Scene::finalize() {
  emitters_.clear();
  emitter_cdf_.clear();
  emitter_prob_.assign(triangles_.size(), 0.0);
  double total = 0.0;
  for (std::uint32_t i = 0; i < triangles_.size(); ++i) {
    const Material& m = materials_[triangles_[i].material];
    const double power = m.emission.mean() * triangles_[i].area;
    if (power > 0.0 && !m.emission_from_texture) {
      emitters_.push_back(i);
      total += power;
      emitter_cdf_.push_back(total);
    }
  }
  double lo = 0.0;
  for (std::size_t k = 0; k < emitters_.size(); ++k) {
    emitter_prob_[emitters_[k]] = (emitter_cdf_[k] - lo) / total;
    lo = emitter_cdf_[k];
    emitter_cdf_[k] /= total;
  }
  bvh_ = std::make_unique<Bvh>(triangles_);
}

double Scene::emitter_pick_probability(std::uint32_t triangle) const {
  return triangle < emitter_prob_.size() ? emitter_prob_[triangle] : 0.0;
}

bool Scene::intersect(const Vec3& origin, const Vec3& dir, double t_max, Hit& hit) const {
  if (!bvh_) fail(ErrorKind::Validation, "scene used before finalize()");
  return bvh_->intersect(triangles_, origin, dir, t_max, hit, false);
}

bool Scene::occluded(const Vec3& origin, const Vec3& dir, double t_max) const {
  if (!bvh_) fail(ErrorKind::Validation, "scene used before finalize()");
  Hit hit;
  return bvh_->intersect(triangles_, origin, dir, t_max, hit, true);
}

Color Scene::albedo_at(const Triangle& tri, const Hit& hit) const {
  const Material& m = materials_[tri.material];
  if (m.texture < 0) return m.albedo;
  const Vec2 uv = (1.0 - hit.b1 - hit.b2) * tri.uv[0] + hit.b1 * tri.uv[1] + hit.b2 * tri.uv[2];
  return textures_[m.texture].sample(uv);
}

Color Scene::emission_at(const Triangle& tri, const Hit& hit) const {
  const Material& m = materials_[tri.material];
  if (m.emission_from_texture && m.texture >= 0) {
    const Vec2 uv = (1.0 - hit.b1 - hit.b2) * tri.uv[0] + hit.b1 * tri.uv[1] + hit.b2 * tri.uv[2];
    return textures_[m.texture].sample(uv);
  }
  return m.emission;
}

Scene build_scene(const surface::HeightfieldMesh& mesh, const Image& texture,
                  const SensorProfile& profile) {
  if (texture.width == 0 || texture.height == 0 || texture.pixels.empty()) {
    fail(ErrorKind::Validation, "base texture is missing");
  }
  if (mesh.vertices.empty() || mesh.triangles.empty()) {
    fail(ErrorKind::Validation, "mesh is empty");
  }
  if (!(profile.camera.forward.norm() > 0.0) ||
      !(profile.camera.forward.cross(profile.camera.up).norm() > 0.0)) {
    fail(ErrorKind::Validation, "degenerate camera direction");
  }
  if (!(profile.camera.vfov_deg > 0.0 && profile.camera.vfov_deg < 180.0)) {
    fail(ErrorKind::Validation, "camera field of view must lie in (0, 180) degrees");
  }
  if (!(profile.roughness == 1.0)) {
    fail(ErrorKind::Validation, "elastomer roughness is fixed at 1.0 (Lambertian)");
  }
  Scene scene;
  Material gel;
  gel.texture = scene.add_texture(Texture(texture));
  scene.add_mesh(mesh, scene.add_material(gel));
  for (const auto& light : profile.lights) scene.add_light(light, profile.light_scale);
  scene.camera = profile.camera;
  scene.width = profile.width;
  scene.height = profile.height;
  scene.exposure = profile.exposure;
  scene.gamma = profile.gamma;
  scene.phong = profile.phong;
  scene.finalize();
  return scene;
}

}  // namespace tacsim::render
