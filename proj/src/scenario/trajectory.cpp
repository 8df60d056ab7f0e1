#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tacsim/error.hpp"
#include "tacsim/scenario.hpp"

namespace tacsim::scenario {
namespace {

using geometry::ShapeKind;
using geometry::ShapeSpec;

ShapeSpec make_shape(ShapeKind kind, std::initializer_list<std::pair<const char*, double>> dims) {
  ShapeSpec s;
  s.kind = kind;
  for (const auto& [key, v] : dims) {
    const std::string k = key;
    if (k == "radius") s.radius = v;
    else if (k == "height") s.height = v;
    else if (k == "minor_radius") s.minor_radius = v;
    else if (k == "inner_radius") s.inner_radius = v;
    else if (k == "cut_radius") s.cut_radius = v;
    else if (k == "cut_offset") s.cut_offset = v;
    else if (k == "mouth_deg") s.mouth_deg = v;
    else if (k == "sx") s.size.x() = v;
    else if (k == "sy") s.size.y() = v;
    else if (k == "sz") s.size.z() = v;
    else if (k == "round") s.edge_round_radius = v;
  }
  s.validate();
  return s;
}

double slide_heading(const std::string& dir) {
  if (dir == "right") return 0.0;
  if (dir == "up") return 90.0;
  if (dir == "left") return 180.0;
  if (dir == "down") return 270.0;
  fail(ErrorKind::Validation,
       "trajectory.directions: unknown slide direction '" + dir + "' (left, right, up, down)");
}

int spin_of(const std::string& dir) {
  if (dir == "ccw") return 1;
  if (dir == "cw") return -1;
  fail(ErrorKind::Validation, "trajectory.directions: unknown rotation direction '" + dir +
                                  "' (cw, ccw)");
}

std::vector<double> sorted_magnitudes(const TrajectorySpec& spec) {
  std::vector<double> m = spec.magnitudes;
  if (m.empty()) fail(ErrorKind::Validation, "trajectory.magnitudes: no capture points");
  for (double v : m) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      fail(ErrorKind::Validation, "trajectory.magnitudes: values must be finite and >= 0");
    }
  }
  std::sort(m.begin(), m.end());
  if (std::adjacent_find(m.begin(), m.end()) != m.end()) {
    fail(ErrorKind::Validation, "trajectory.magnitudes: duplicate values");
  }
  return m;
}

void require_speed(double v, const char* key) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    fail(ErrorKind::Validation, std::string("trajectory.") + key + " must be positive");
  }
}

}  // namespace

std::string_view to_string(PhaseKind kind) {
  switch (kind) {
    case PhaseKind::Press: return "press";
    case PhaseKind::Slide: return "slide";
    case PhaseKind::Rotate: return "rotate";
    case PhaseKind::Dwell: return "dwell";
  }
  return "unknown";
}

std::string Run::directory() const {
  return variant.empty() ? shape_name : shape_name + "-" + variant;
}

std::size_t Run::captures() const {
  return static_cast<std::size_t>(
      std::count_if(phases.begin(), phases.end(), [](const auto& p) { return p.capture; }));
}

std::vector<NamedShape> shape_catalogue() {
  using K = ShapeKind;
  return {
      {"sphere", make_shape(K::Sphere, {{"radius", 4.0}})},
      {"sphere_small", make_shape(K::Sphere, {{"radius", 2.5}})},
      {"sphere_large", make_shape(K::Sphere, {{"radius", 5.0}})},
      {"cylinder", make_shape(K::Cylinder, {{"radius", 3.0}, {"height", 6.0}})},
      {"cylinder_small", make_shape(K::Cylinder, {{"radius", 1.5}, {"height", 6.0}, {"round", 0.4}})},
      {"cylinder_flat", make_shape(K::Cylinder, {{"radius", 4.0}, {"height", 2.0}})},
      {"torus", make_shape(K::Torus, {{"radius", 3.0}, {"minor_radius", 1.0}})},
      {"torus_thin", make_shape(K::Torus, {{"radius", 3.0}, {"minor_radius", 0.6}})},
      {"torus_large", make_shape(K::Torus, {{"radius", 4.0}, {"minor_radius", 1.2}})},
      {"prism", make_shape(K::Prism, {{"sx", 4.0}, {"sy", 4.0}, {"sz", 4.0}})},
      {"prism_small", make_shape(K::Prism, {{"sx", 2.0}, {"sy", 2.0}, {"sz", 4.0}})},
      {"prism_bar", make_shape(K::Prism, {{"sx", 8.0}, {"sy", 2.0}, {"sz", 4.0}})},
      {"prism_line", make_shape(K::Prism, {{"sx", 10.0}, {"sy", 1.0}, {"sz", 4.0}, {"round", 0.3}})},
      {"prism_slab", make_shape(K::Prism, {{"sx", 6.0}, {"sy", 6.0}, {"sz", 2.0}})},
      {"moon", make_shape(K::Moon, {})},
      {"moon_thin", make_shape(K::Moon, {{"cut_radius", 3.8}, {"cut_offset", 1.5}, {"round", 0.3}})},
      {"pacman", make_shape(K::Pacman, {})},
      {"pacman_narrow", make_shape(K::Pacman, {{"mouth_deg", 45.0}})},
      {"dot_in", make_shape(K::DotIn, {})},
      {"dot_in_wide", make_shape(K::DotIn, {{"inner_radius", 2.5}, {"round", 0.4}})},
      {"ring", make_shape(K::DotIn, {{"radius", 3.0}, {"inner_radius", 2.2}, {"round", 0.3}})},
  };
}

NamedShape catalogue_shape(std::string_view name) {
  const auto all = shape_catalogue();
  for (const auto& s : all) {
    if (s.name == name) return s;
  }
  std::string known;
  for (const auto& s : all) known += (known.empty() ? "" : ", ") + s.name;
  fail(ErrorKind::Validation,
       "unknown shape '" + std::string(name) + "' (catalogue: " + known + ")");
}

std::vector<Run> trajectory_expand(const TrajectorySpec& spec) {
  if (spec.shapes.empty()) fail(ErrorKind::Validation, "trajectory.shapes: no shapes");
  std::vector<Run> runs;

  if (spec.kind == TrajectoryKind::Custom) {
    if (spec.custom.empty()) fail(ErrorKind::Validation, "trajectory.phases: no phases");
    double label = 0.0;
    std::vector<TrajectoryPhase> phases = spec.custom;
    for (auto& p : phases) {
      if (!(p.magnitude >= 0.0)) {
        fail(ErrorKind::Validation, "trajectory.phases: magnitude must be >= 0");
      }
      if (p.kind != PhaseKind::Dwell) require_speed(p.speed, "phases.speed");
      label += p.magnitude;
      p.label = label;
    }
    for (const auto& s : spec.shapes) runs.push_back({s.name, s.spec, Vec2::Zero(), 0.0, "", phases});
  } else {
    const auto mags = sorted_magnitudes(spec);
    require_speed(spec.press_speed, "press_speed");
    if (spec.kind == TrajectoryKind::Press) {
      if (spec.grid_nx < 1 || spec.grid_ny < 1) {
        fail(ErrorKind::Validation, "trajectory.grid: counts must be >= 1");
      }
      std::vector<TrajectoryPhase> phases;
      double prev = 0.0;
      for (double d : mags) {
        phases.push_back({PhaseKind::Press, d - prev, spec.press_speed, true, 0.0, 1, d});
        prev = d;
      }
      const bool single = spec.grid_nx * spec.grid_ny == 1;
      for (const auto& s : spec.shapes) {
        int index = 0;
        for (int j = 0; j < spec.grid_ny; ++j) {
          for (int i = 0; i < spec.grid_nx; ++i, ++index) {
            const Vec2 loc((i - 0.5 * (spec.grid_nx - 1)) * spec.grid_spacing,
                           (j - 0.5 * (spec.grid_ny - 1)) * spec.grid_spacing);
            runs.push_back({s.name, s.spec, loc, 0.0, single ? "" : "loc" + std::to_string(index),
                            phases});
          }
        }
      }
    } else {
      const bool slip = spec.kind == TrajectoryKind::Slip;
      require_speed(slip ? spec.slide_speed : spec.rotate_speed,
                    slip ? "slide_speed" : "rotate_speed");
      if (!(spec.press_depth >= 0.0)) {
        fail(ErrorKind::Validation, "trajectory.press_depth must be >= 0");
      }
      if (spec.directions.empty()) fail(ErrorKind::Validation, "trajectory.directions: none given");
      for (const auto& s : spec.shapes) {
        for (const auto& dir : spec.directions) {
          std::vector<TrajectoryPhase> phases;
          phases.push_back({PhaseKind::Press, spec.press_depth, spec.press_speed, mags.front() == 0.0,
                            0.0, 1, 0.0});
          double prev = 0.0;
          for (double m : mags) {
            if (m == 0.0) continue;
            TrajectoryPhase p;
            p.kind = slip ? PhaseKind::Slide : PhaseKind::Rotate;
            p.magnitude = m - prev;
            p.speed = slip ? spec.slide_speed : spec.rotate_speed;
            p.capture = true;
            p.label = m;
            if (slip) p.direction_deg = slide_heading(dir);
            else p.spin = spin_of(dir);
            phases.push_back(p);
            prev = m;
          }
          runs.push_back({s.name, s.spec, Vec2::Zero(), 0.0, dir, phases});
        }
      }
    }
  }
  if (count_captures(runs) == 0) {
    fail(ErrorKind::Validation, "trajectory expands to zero capture points");
  }
  return runs;
}

std::size_t count_captures(const std::vector<Run>& runs) {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.captures();
  return n;
}

}  // namespace tacsim::scenario
