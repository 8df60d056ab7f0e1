#include <algorithm>
#include <array>
#include <cmath>

#include "tacsim/error.hpp"
#include "tacsim/geometry.hpp"

namespace tacsim::geometry {
namespace {

constexpr std::array<std::pair<ShapeKind, std::string_view>, 7> kKindNames{{
    {ShapeKind::Sphere, "sphere"},
    {ShapeKind::Cylinder, "cylinder"},
    {ShapeKind::Torus, "torus"},
    {ShapeKind::Prism, "prism"},
    {ShapeKind::Moon, "moon"},
    {ShapeKind::Pacman, "pacman"},
    {ShapeKind::DotIn, "dot_in"},
}};

double disc(const Vec2& p, double r) { return p.norm() - r; }

// Signed distance to the wedge {|atan2(y, x)| <= half_angle}.
double wedge(const Vec2& p, double half_angle) {
  const Vec2 d1(std::cos(half_angle), std::sin(half_angle));
  const Vec2 d2(d1.x(), -d1.y());
  auto ray_dist = [&](const Vec2& d) { return (p - std::max(p.dot(d), 0.0) * d).norm(); };
  const double dist = std::min(ray_dist(d1), ray_dist(d2));
  const bool inside = std::abs(std::atan2(p.y(), p.x())) <= half_angle;
  return inside ? -dist : dist;
}

// 2-D profile distance, shrunk inward by `inset`.
double profile(const ShapeSpec& s, const Vec2& p, double inset) {
  switch (s.kind) {
    case ShapeKind::Cylinder:
      return disc(p, s.radius) + inset;
    case ShapeKind::Moon:
      return std::max(disc(p, s.radius), -disc(p - Vec2(s.cut_offset, 0.0), s.cut_radius)) +
             inset;
    case ShapeKind::Pacman:
      return std::max(disc(p, s.radius), -wedge(p, 0.5 * s.mouth_deg * M_PI / 180.0)) + inset;
    case ShapeKind::DotIn:
      return std::max(disc(p, s.radius), s.inner_radius - p.norm()) + inset;
    default:
      break;
  }
  fail(ErrorKind::Validation, "shape kind has no 2-D profile");
}

double extrude(double d2, double z, double half_height) {
  const Vec2 w(d2, std::abs(z) - half_height);
  return std::min(std::max(w.x(), w.y()), 0.0) + w.cwiseMax(0.0).norm();
}

}  // namespace

std::string_view to_string(ShapeKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ShapeKind parse_shape_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  std::string known;
  for (const auto& [k, n] : kKindNames) known += (known.empty() ? "" : ", ") + std::string(n);
  fail(ErrorKind::Validation,
       "unknown shape kind '" + std::string(name) + "' (known: " + known + ")");
}

void ShapeSpec::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail(ErrorKind::Validation, std::string("shape.") + field + " must be positive");
    }
  };
  if (!(edge_round_radius >= 0.0)) {
    fail(ErrorKind::Validation, "shape.edge_round_radius must be non-negative");
  }
  double feature = 0.0;
  switch (kind) {
    case ShapeKind::Sphere:
      positive(radius, "radius");
      feature = radius;
      break;
    case ShapeKind::Cylinder:
      positive(radius, "radius");
      positive(height, "height");
      feature = std::min(radius, 0.5 * height);
      break;
    case ShapeKind::Torus:
      positive(radius, "radius");
      positive(minor_radius, "minor_radius");
      if (minor_radius >= radius) {
        fail(ErrorKind::Validation, "shape.minor_radius must be below radius");
      }
      feature = minor_radius;
      break;
    case ShapeKind::Prism:
      positive(size.x(), "size");
      positive(size.y(), "size");
      positive(size.z(), "size");
      feature = 0.5 * size.minCoeff();
      break;
    case ShapeKind::Moon:
      positive(radius, "radius");
      positive(height, "height");
      positive(cut_radius, "cut_radius");
      positive(cut_offset, "cut_offset");
      if (cut_offset - cut_radius <= -radius) {
        fail(ErrorKind::Validation, "shape.cut_radius/cut_offset remove the whole moon");
      }
      feature = std::min({0.5 * (radius + cut_offset - cut_radius), 0.5 * height});
      break;
    case ShapeKind::Pacman:
      positive(radius, "radius");
      positive(height, "height");
      if (!(mouth_deg > 0.0 && mouth_deg < 360.0)) {
        fail(ErrorKind::Validation, "shape.mouth_deg must lie in (0, 360)");
      }
      feature = std::min(0.5 * radius, 0.5 * height);
      break;
    case ShapeKind::DotIn:
      positive(radius, "radius");
      positive(height, "height");
      positive(inner_radius, "inner_radius");
      if (inner_radius >= radius) {
        fail(ErrorKind::Validation, "shape.inner_radius must be below radius");
      }
      feature = std::min(0.5 * (radius - inner_radius), 0.5 * height);
      break;
  }
  if (edge_round_radius >= feature) {
    fail(ErrorKind::Validation, "shape.edge_round_radius must be below the smallest feature radius");
  }
}

Vec3 ShapeSpec::half_extents() const {
  switch (kind) {
    case ShapeKind::Sphere:
      return Vec3::Constant(radius);
    case ShapeKind::Torus:
      return {radius + minor_radius, radius + minor_radius, minor_radius};
    case ShapeKind::Prism:
      return 0.5 * size;
    default:
      return {radius, radius, 0.5 * height};
  }
}

double normalize_degrees(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

Vec3 Pose::apply(const Vec3& local) const {
  const double a = normalize_degrees(rotation_deg) * M_PI / 180.0;
  if (a == 0.0) return local + translation;
  const double c = std::cos(a);
  const double s = std::sin(a);
  return Vec3(c * local.x() - s * local.y(), s * local.x() + c * local.y(), local.z()) +
         translation;
}

double sdf_eval(const ShapeSpec& s, const Vec3& p) {
  const double r = s.edge_round_radius;
  switch (s.kind) {
    case ShapeKind::Sphere:
      return p.norm() - s.radius;
    case ShapeKind::Torus:
      return Vec2(p.head<2>().norm() - s.radius, p.z()).norm() - s.minor_radius;
    case ShapeKind::Prism: {
      const Vec3 q = p.cwiseAbs() - (0.5 * s.size - Vec3::Constant(r));
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0) - r;
    }
    case ShapeKind::Cylinder:
    case ShapeKind::Moon:
    case ShapeKind::Pacman:
    case ShapeKind::DotIn:
      return extrude(profile(s, p.head<2>(), r), p.z(), 0.5 * s.height - r) - r;
  }
  fail(ErrorKind::Validation, "unknown shape kind");
}

}  // namespace tacsim::geometry
