#include <cmath>

#include "tacsim/error.hpp"
#include "tacsim/render.hpp"

namespace tacsim::render {
namespace {

constexpr double kStripGap = 0.5;     // mm between raster edge and strip
constexpr double kStripLow = 0.5;     // mm above the rest surface
constexpr double kStripHigh = 6.0;

struct Preset {
  const char* name;
  std::uint32_t width, height;
  double pitch;
  Color left, right, bottom, top;  // strip colors as seen in the image
  double light_scale, exposure;
};

const Preset kPresets[] = {
    {"gelsight", 640, 480, 0.025, {40, 40, 255}, {40, 255, 40}, {255, 40, 40}, {255, 255, 255},
     1.0, 2.5},
    {"slip-sensor", 480, 480, 0.0333, {255, 255, 255}, {255, 255, 255}, {255, 255, 255},
     {255, 255, 255}, 1.0, 2.0},
};

const Preset& find_preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (name == p.name) return p;
  }
  std::string known;
  for (const auto& p : kPresets) known += std::string(known.empty() ? "" : ", ") + p.name;
  fail(ErrorKind::Validation, "unknown sensor profile '" + std::string(name) + "' (available: " +
                                  known + ")");
}

// Vertical strip facing `inward`, running from a to b at the strip heights.
AreaLight strip(const Vec3& a, const Vec3& b, const Vec3& inward, const Color& rgb) {
  AreaLight l;
  l.rgb = rgb;
  l.corners = {Vec3(a.x(), a.y(), kStripLow), Vec3(b.x(), b.y(), kStripLow),
               Vec3(b.x(), b.y(), kStripHigh), Vec3(a.x(), a.y(), kStripHigh)};
  if (l.normal().dot(inward) < 0.0) std::swap(l.corners[1], l.corners[3]);
  return l;
}

}  // namespace

std::vector<std::string> profile_names() {
  std::vector<std::string> names;
  for (const auto& p : kPresets) names.emplace_back(p.name);
  return names;
}

SensorProfile make_profile(std::string_view name) {
  const Preset& p = find_preset(name);
  return make_profile(name, p.width, p.height, p.pitch);
}

SensorProfile make_profile(std::string_view name, std::uint32_t width, std::uint32_t height,
                           double pixel_pitch) {
  const Preset& p = find_preset(name);
  SensorProfile s;
  s.name = p.name;
  s.width = width;
  s.height = height;
  s.pixel_pitch = pixel_pitch;
  s.light_scale = p.light_scale;
  s.exposure = p.exposure;
  layout_profile(s);
  return s;
}

void layout_profile(SensorProfile& s) {
  if (s.width < 2 || s.height < 2) fail(ErrorKind::Validation, "profile resolution must be >= 2x2");
  if (!(s.pixel_pitch > 0.0)) fail(ErrorKind::Validation, "profile pixel_pitch must be > 0");
  if (!(s.camera_height > kStripHigh)) {
    fail(ErrorKind::Validation, "camera_height must clear the LED strips");
  }
  const Preset& p = find_preset(s.name);
  // The mesh spans [0, (w-1)p] x [0, (h-1)p]; pixel centers land on vertices.
  const double x1 = (s.width - 1) * s.pixel_pitch;
  const double y1 = (s.height - 1) * s.pixel_pitch;
  const Vec3 c(0.5 * x1, 0.5 * y1, 0.0);
  s.camera.position = c + Vec3(0.0, 0.0, s.camera_height);
  s.camera.forward = Vec3(0.0, 0.0, -1.0);
  s.camera.up = Vec3(0.0, 1.0, 0.0);
  s.camera.vfov_deg =
      2.0 * std::atan(0.5 * s.height * s.pixel_pitch / s.camera_height) * 180.0 / M_PI;

  const double xl = -kStripGap, xr = x1 + kStripGap;
  const double yb = -kStripGap, yt = y1 + kStripGap;
  s.lights = {
      strip({xl, yb, 0}, {xl, yt, 0}, Vec3::UnitX(), p.left),
      strip({xr, yb, 0}, {xr, yt, 0}, -Vec3::UnitX(), p.right),
      strip({xl, yb, 0}, {xr, yb, 0}, Vec3::UnitY(), p.bottom),
      strip({xl, yt, 0}, {xr, yt, 0}, -Vec3::UnitY(), p.top),
  };
}

}  // namespace tacsim::render
