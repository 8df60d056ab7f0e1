#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>

#include "tacsim/error.hpp"
#include "tacsim/parallel.hpp"
#include "tacsim/render.hpp"

namespace tacsim::render {
namespace {

constexpr double kRayEpsilon = 1e-5;  // mm
// Scenes with at most this many emitter triangles (the sensor strips) get a
// shadow ray to every emitter at each vertex instead of one picked emitter,
// which removes the color noise of choosing between differently tinted LEDs.
constexpr std::size_t kExhaustiveEmitters = 16;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class Sampler {
 public:
  Sampler(std::uint64_t seed, std::uint64_t pixel) : rng_(splitmix64(seed ^ splitmix64(pixel))) {}
  double next() { return dist_(rng_); }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> dist_{0.0, 1.0};
};

struct CameraFrame {
  Vec3 origin, forward, right, up;
  double tan_half, aspect;
  std::uint32_t width, height;

  CameraFrame(const Scene& s) : width(s.width), height(s.height) {
    origin = s.camera.position;
    forward = s.camera.forward.normalized();
    right = forward.cross(s.camera.up).normalized();
    up = right.cross(forward);
    tan_half = std::tan(0.5 * s.camera.vfov_deg * M_PI / 180.0);
    aspect = static_cast<double>(width) / height;
  }
  Vec3 direction(double px, double py) const {
    const double x = (2.0 * px / width - 1.0) * tan_half * aspect;
    const double y = (1.0 - 2.0 * py / height) * tan_half;
    return (forward + x * right + y * up).normalized();
  }
};

Vec3 cosine_sample(const Vec3& n, double u1, double u2) {
  const double r = std::sqrt(u1);
  const double phi = 2.0 * M_PI * u2;
  const Vec3 a = std::abs(n.x()) > 0.9 ? Vec3::UnitY() : Vec3::UnitX();
  const Vec3 t = n.cross(a).normalized();
  const Vec3 b = n.cross(t);
  return (r * std::cos(phi) * t + r * std::sin(phi) * b + std::sqrt(std::max(0.0, 1.0 - u1)) * n)
      .normalized();
}

Vec3 shading_normal(const Scene::Triangle& tri, const Scene::Hit& hit) {
  const Vec3 n = (1.0 - hit.b1 - hit.b2) * tri.n[0] + hit.b1 * tri.n[1] + hit.b2 * tri.n[2];
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : tri.geometric_normal;
}

double power_heuristic(double a, double b) {
  const double a2 = a * a;
  const double b2 = b * b;
  return a2 + b2 > 0.0 ? a2 / (a2 + b2) : 0.0;
}

Color trace(const Scene& scene, Vec3 origin, Vec3 dir, Sampler& sampler,
            const RenderSettings& settings) {
  const auto& tris = scene.triangles();
  const auto& emitters = scene.emitters();
  const auto& cdf = scene.emitter_cdf();
  Color radiance = Color::Zero();
  Color throughput = Color::Ones();
  double bsdf_pdf = 0.0;
  bool camera_ray = true;
  const bool exhaustive = emitters.size() <= kExhaustiveEmitters;
  auto pick_probability = [&](std::uint32_t id) {
    return exhaustive ? 1.0 : scene.emitter_pick_probability(id);
  };

  for (int bounce = 0;; ++bounce) {
    Scene::Hit hit;
    if (!scene.intersect(origin, dir, std::numeric_limits<double>::infinity(), hit)) break;
    const Scene::Triangle& tri = tris[hit.triangle];
    const Vec3 p = origin + hit.t * dir;
    const double cos_out = -dir.dot(tri.geometric_normal);
    const bool front = cos_out > 0.0;

    if (front) {
      const Color le = scene.emission_at(tri, hit);
      if ((le > 0.0).any()) {
        const double pick = scene.emitter_pick_probability(hit.triangle) > 0.0
                                ? pick_probability(hit.triangle)
                                : 0.0;
        if (camera_ray || pick == 0.0) {
          radiance += throughput * le;
        } else {
          const double light_pdf = pick / tri.area * hit.t * hit.t / cos_out;
          radiance += throughput * le * power_heuristic(bsdf_pdf, light_pdf);
        }
      }
    }
    if (bounce >= settings.max_bounces) break;

    const Color albedo = scene.albedo_at(tri, hit);
    if (albedo.maxCoeff() <= 0.0) break;

    const Vec3 ng = front ? tri.geometric_normal : Vec3(-tri.geometric_normal);
    Vec3 n = shading_normal(tri, hit);
    if (n.dot(ng) < 0.0) n = -n;
    const Vec3 surface = p + kRayEpsilon * ng;

    // Next-event estimation toward every emitter, or one picked by power.
    auto sample_emitter = [&](std::uint32_t light_id) {
      const Scene::Triangle& light = tris[light_id];
      const double a = sampler.next();
      const double b = sampler.next();
      const double sa = std::sqrt(a);
      const Vec3 q = (1.0 - sa) * light.p[0] + sa * (1.0 - b) * light.p[1] + sa * b * light.p[2];
      Vec3 wi = q - surface;
      const double dist2 = wi.squaredNorm();
      const double dist = std::sqrt(dist2);
      wi /= dist;
      const double cos_surf = n.dot(wi);
      const double cos_light = -light.geometric_normal.dot(wi);
      if (cos_surf > 0.0 && cos_light > 0.0 && ng.dot(wi) > 0.0 &&
          !scene.occluded(surface, wi, dist * (1.0 - 1e-6))) {
        const double light_pdf = pick_probability(light_id) / light.area * dist2 / cos_light;
        const double pdf_bsdf = cos_surf / M_PI;
        const Color le = scene.materials()[light.material].emission;
        radiance += throughput * albedo / M_PI * le * cos_surf / light_pdf *
                    power_heuristic(light_pdf, pdf_bsdf);
      }
    };
    if (exhaustive) {
      for (auto id : emitters) sample_emitter(id);
    } else if (!emitters.empty()) {
      const double u = sampler.next();
      const auto k = static_cast<std::size_t>(
          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      sample_emitter(emitters[std::min(k, emitters.size() - 1)]);
    }

    // Cosine-weighted continuation; the Lambertian weight reduces to albedo.
    const Vec3 wi = cosine_sample(n, sampler.next(), sampler.next());
    const double cos_wi = n.dot(wi);
    if (cos_wi <= 0.0 || ng.dot(wi) <= 0.0) break;
    bsdf_pdf = cos_wi / M_PI;
    throughput *= albedo;
    camera_ray = false;
    origin = surface;
    dir = wi;

    if (bounce + 1 >= settings.roulette_start) {
      const double survive = std::min(0.95, throughput.maxCoeff());
      if (sampler.next() >= survive) break;
      throughput /= survive;
    }
  }
  return radiance;
}

std::uint8_t quantize_channel(double v, double exposure, bool gamma) {
  double x = std::max(0.0, v * exposure);
  if (gamma) x = std::pow(x, 1.0 / 2.2);
  return static_cast<std::uint8_t>(std::clamp(std::lround(x * 255.0), 0L, 255L));
}

}  // namespace

RadianceImage render_radiance(const Scene& scene, const RenderSettings& settings,
                              RenderStats* stats) {
  if (settings.samples_per_pixel < 1) fail(ErrorKind::Validation, "samples_per_pixel must be >= 1");
  if (settings.max_bounces < 1) fail(ErrorKind::Validation, "max_bounces must be >= 1");
  const CameraFrame cam(scene);
  RadianceImage out;
  out.width = scene.width;
  out.height = scene.height;
  out.pixels.assign(static_cast<std::size_t>(scene.width) * scene.height, Color::Zero());
  std::atomic<std::uint64_t> rejected{0};

  parallel_for(0, scene.height, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::uint32_t x = 0; x < scene.width; ++x) {
        const std::size_t pixel = y * scene.width + x;
        Sampler sampler(settings.seed, pixel);
        Color sum = Color::Zero();
        int accepted = 0;
        for (int s = 0; s < settings.samples_per_pixel; ++s) {
          double jx = 0.5, jy = 0.5;
          if (settings.jitter) {
            jx = sampler.next();
            jy = sampler.next();
          }
          const Color l = trace(scene, cam.origin, cam.direction(x + jx, y + jy), sampler, settings);
          if (l.allFinite()) {
            sum += l;
            ++accepted;
          } else {
            rejected.fetch_add(1, std::memory_order_relaxed);
          }
        }
        out.pixels[pixel] = accepted > 0 ? Color(sum / accepted) : Color::Zero();
      }
    }
  });
  if (stats) stats->rejected_samples = rejected.load();
  return out;
}

Image tone_map(const RadianceImage& radiance, double exposure, bool gamma) {
  Image img(radiance.width, radiance.height);
  for (std::size_t i = 0; i < radiance.pixels.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      img.pixels[3 * i + c] = quantize_channel(radiance.pixels[i][c], exposure, gamma);
    }
  }
  return img;
}

Image render_path_traced(const Scene& scene, int samples_per_pixel, int max_bounces,
                         std::uint64_t seed) {
  RenderSettings settings;
  settings.samples_per_pixel = samples_per_pixel;
  settings.max_bounces = max_bounces;
  settings.seed = seed;
  return render_path_traced(scene, settings);
}

Image render_path_traced(const Scene& scene, const RenderSettings& settings, RenderStats* stats) {
  return tone_map(render_radiance(scene, settings, stats), scene.exposure, scene.gamma);
}

RadianceImage render_phong_radiance(const Scene& scene) {
  const CameraFrame cam(scene);
  const PhongParams& ph = scene.phong;
  RadianceImage out;
  out.width = scene.width;
  out.height = scene.height;
  out.pixels.assign(static_cast<std::size_t>(scene.width) * scene.height, Color::Zero());
  const auto& tris = scene.triangles();

  parallel_for(0, scene.height, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::uint32_t x = 0; x < scene.width; ++x) {
        const Vec3 dir = cam.direction(x + 0.5, y + 0.5);
        Scene::Hit hit;
        if (!scene.intersect(cam.origin, dir, std::numeric_limits<double>::infinity(), hit)) {
          continue;
        }
        const Scene::Triangle& tri = tris[hit.triangle];
        const Color le = scene.emission_at(tri, hit);
        Color c = (-dir.dot(tri.geometric_normal) > 0.0) ? le : Color::Zero();
        const Color albedo = scene.albedo_at(tri, hit);
        if (albedo.maxCoeff() > 0.0) {
          const Vec3 p = cam.origin + hit.t * dir;
          Vec3 n = shading_normal(tri, hit);
          if (n.dot(dir) > 0.0) n = -n;
          const Vec3 view = -dir;
          c += ph.ambient * albedo;
          for (const auto& [light, scale] : scene.lights()) {
            const Color lc = light.rgb / 255.0 * ph.light_scale;
            const Vec3 l = (light.center() - p).normalized();
            const double ndl = std::max(0.0, n.dot(l));
            const Vec3 r = 2.0 * n.dot(l) * n - l;
            const double spec = ndl > 0.0 ? std::pow(std::max(0.0, r.dot(view)), ph.shininess) : 0.0;
            c += lc * (ph.diffuse * ndl * albedo + ph.specular * spec);
          }
        }
        out.pixels[y * scene.width + x] = c;
      }
    }
  });
  return out;
}

Image render_phong(const Scene& scene) {
  return tone_map(render_phong_radiance(scene), scene.exposure, scene.gamma);
}

}  // namespace tacsim::render
