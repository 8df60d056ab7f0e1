#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "tacsim/error.hpp"
#include "tacsim/metrics.hpp"
#include "tacsim/scenario.hpp"

namespace tacsim::scenario {
namespace {

struct Raster {
  std::uint32_t width, height;
  double pitch;
};

Raster sensor_raster(std::string_view profile, std::string_view scale) {
  const bool paper = scale == "paper";
  if (profile == "gelsight") return paper ? Raster{640, 480, 0.025} : Raster{160, 120, 0.1};
  if (profile == "slip-sensor") {
    return paper ? Raster{480, 480, 0.0333} : Raster{120, 120, 0.1333};
  }
  render::make_profile(profile);  // throws with the list of profiles
  return {};
}

void apply_scale(ScenarioConfig& c, std::string_view scale) {
  if (scale != "desk" && scale != "paper") {
    fail(ErrorKind::Validation, "scale must be 'desk' or 'paper', got '" + std::string(scale) + "'");
  }
  c.scale = std::string(scale);
  const bool paper = scale == "paper";
  c.elastomer_counts = paper ? Vec3i(201, 201, 41) : Vec3i(101, 101, 21);
  c.sim.grid_width = paper ? 0.2 : 0.4;
  c.spp = paper ? 128 : 32;
  const Raster r = sensor_raster(c.sensor.name, scale);
  c.sensor = render::make_profile(c.sensor.name, r.width, r.height, r.pitch);
}

std::string fmt(double v) { return metrics::format_double(v); }

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt(x);
  return s;
}

// --- YAML helpers -----------------------------------------------------------

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void error(const YAML::Node& node, const std::string& key,
                          const std::string& msg) const {
    const auto m = node.Mark();
    fail(ErrorKind::Validation, origin_ + ":" + std::to_string(m.line + 1) + ":" +
                                    std::to_string(m.column + 1) + ": " + key + ": " + msg);
  }

  template <typename T>
  T scalar(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) error(n, key, "expected a scalar value");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      error(n, key, "cannot parse '" + n.Scalar() + "'");
    }
  }

  double number(const YAML::Node& n, const std::string& key) const {
    const double v = scalar<double>(n, key);
    if (!std::isfinite(v)) error(n, key, "must be finite");
    return v;
  }

  std::vector<double> numbers(const YAML::Node& n, const std::string& key) const {
    std::vector<double> out;
    if (n.IsSequence()) {
      for (const auto& e : n) out.push_back(number(e, key));
      return out;
    }
    // "start:stop:step" inclusive range, or a single number.
    const std::string s = scalar<std::string>(n, key);
    if (s.find(':') == std::string::npos) return {number(n, key)};
    double a, b, step;
    char c1, c2;
    std::istringstream is(s);
    if (!(is >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !is.eof()) {
      error(n, key, "expected a list or 'start:stop:step', got '" + s + "'");
    }
    if (!(step > 0.0) || b < a) error(n, key, "range must have step > 0 and stop >= start");
    const auto count = static_cast<long>(std::floor((b - a) / step + 1e-9));
    for (long i = 0; i <= count; ++i) out.push_back(a + i * step);
    return out;
  }

  std::vector<std::string> strings(const YAML::Node& n, const std::string& key) const {
    std::vector<std::string> out;
    if (n.IsSequence()) {
      for (const auto& e : n) out.push_back(scalar<std::string>(e, key));
    } else {
      out.push_back(scalar<std::string>(n, key));
    }
    return out;
  }

  Vec3 vec3(const YAML::Node& n, const std::string& key) const {
    const auto v = numbers(n, key);
    if (v.size() != 3 || !n.IsSequence()) error(n, key, "expected [x, y, z]");
    return {v[0], v[1], v[2]};
  }

 private:
  std::string origin_;
};

struct SensorOverrides {
  std::string profile;
  std::optional<std::uint32_t> width, height;
  std::optional<double> pitch, camera_height, exposure, light_scale;
  std::optional<bool> gamma;
};

using Setter = std::function<void(const Reader&, const YAML::Node&, const std::string&,
                                  ScenarioConfig&, SensorOverrides&)>;

template <typename F>
Setter num(F f) {
  return [f](const Reader& r, const YAML::Node& n, const std::string& k, ScenarioConfig& c,
             SensorOverrides&) { f(c, r.number(n, k)); };
}
template <typename F>
Setter flag(F f) {
  return [f](const Reader& r, const YAML::Node& n, const std::string& k, ScenarioConfig& c,
             SensorOverrides&) { f(c, r.scalar<bool>(n, k)); };
}

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto shape_num = [&](const char* key, double geometry::ShapeSpec::*field) {
      t[std::string("shape.") + key] = [field](const Reader& r, const YAML::Node& n,
                                               const std::string& k, ScenarioConfig& c,
                                               SensorOverrides&) {
        for (auto& s : c.trajectory.shapes) s.spec.*field = r.number(n, k);
      };
    };
    // top level
    t["seed"] = [](const Reader& r, const YAML::Node& n, const std::string& k, ScenarioConfig& c,
                   SensorOverrides&) { c.seed = r.scalar<std::uint64_t>(n, k); };
    t["output_dir"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                         ScenarioConfig& c, SensorOverrides&) {
      c.output_dir = r.scalar<std::string>(n, k);
    };
    t["rest_check"] = flag([](ScenarioConfig& c, bool v) { c.rest_check = v; });
    t["capture_every_step"] = flag([](ScenarioConfig& c, bool v) { c.capture_every_step = v; });
    // sensor
    t["sensor.profile"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                             ScenarioConfig&, SensorOverrides& s) {
      s.profile = r.scalar<std::string>(n, k);
      try {
        render::make_profile(s.profile);
      } catch (const Error& e) {
        r.error(n, k, e.what());
      }
    };
    t["sensor.width"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                           ScenarioConfig&, SensorOverrides& s) {
      s.width = r.scalar<std::uint32_t>(n, k);
    };
    t["sensor.height"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                            ScenarioConfig&, SensorOverrides& s) {
      s.height = r.scalar<std::uint32_t>(n, k);
    };
    auto sensor_num = [&](const char* key, std::optional<double> SensorOverrides::*field) {
      t[std::string("sensor.") + key] = [field](const Reader& r, const YAML::Node& n,
                                                const std::string& k, ScenarioConfig&,
                                                SensorOverrides& s) { s.*field = r.number(n, k); };
    };
    sensor_num("pixel_pitch", &SensorOverrides::pitch);
    sensor_num("camera_height", &SensorOverrides::camera_height);
    sensor_num("exposure", &SensorOverrides::exposure);
    sensor_num("light_scale", &SensorOverrides::light_scale);
    t["sensor.gamma"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                           ScenarioConfig&, SensorOverrides& s) { s.gamma = r.scalar<bool>(n, k); };
    // shape: applies to a single configured shape
    t["shape.kind"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                         ScenarioConfig& c, SensorOverrides&) {
      geometry::ShapeSpec spec;
      try {
        spec.kind = geometry::parse_shape_kind(r.scalar<std::string>(n, k));
      } catch (const Error& e) {
        r.error(n, k, e.what());
      }
      c.trajectory.shapes = {{std::string(geometry::to_string(spec.kind)), spec}};
    };
    t["shape.name"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                         ScenarioConfig& c, SensorOverrides&) {
      if (c.trajectory.shapes.size() != 1) r.error(n, k, "needs exactly one shape");
      c.trajectory.shapes[0].name = r.scalar<std::string>(n, k);
    };
    shape_num("radius", &geometry::ShapeSpec::radius);
    shape_num("height", &geometry::ShapeSpec::height);
    shape_num("minor_radius", &geometry::ShapeSpec::minor_radius);
    shape_num("inner_radius", &geometry::ShapeSpec::inner_radius);
    shape_num("cut_radius", &geometry::ShapeSpec::cut_radius);
    shape_num("cut_offset", &geometry::ShapeSpec::cut_offset);
    shape_num("mouth_deg", &geometry::ShapeSpec::mouth_deg);
    shape_num("edge_round_radius", &geometry::ShapeSpec::edge_round_radius);
    t["shape.size"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                         ScenarioConfig& c, SensorOverrides&) {
      for (auto& s : c.trajectory.shapes) s.spec.size = r.vec3(n, k);
    };
    // elastomer / object
    t["elastomer.extent"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                               ScenarioConfig& c, SensorOverrides&) {
      c.elastomer_extent = r.vec3(n, k);
    };
    t["elastomer.counts"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                               ScenarioConfig& c, SensorOverrides&) {
      const Vec3 v = r.vec3(n, k);
      if (v != v.array().round().matrix()) r.error(n, k, "counts must be integers");
      c.elastomer_counts = v.cast<int>();
    };
    t["elastomer.density"] = num([](ScenarioConfig& c, double v) { c.elastomer_density = v; });
    t["object.density"] = num([](ScenarioConfig& c, double v) { c.object_density = v; });
    t["object.spacing"] = num([](ScenarioConfig& c, double v) { c.object_spacing = v; });
    t["object.band"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                          ScenarioConfig& c, SensorOverrides&) {
      if (n.IsScalar() && n.Scalar() == "auto") {
        c.object_band = -1.0;
      } else {
        c.object_band = r.scalar<double>(n, k);
        if (c.object_band < 0.0) r.error(n, k, "must be >= 0 or 'auto'");
      }
    };
    t["object.approach_gap"] = num([](ScenarioConfig& c, double v) { c.approach_gap = v; });
    t["pose.x"] = num([](ScenarioConfig& c, double v) { c.pose.translation.x() = v; });
    t["pose.y"] = num([](ScenarioConfig& c, double v) { c.pose.translation.y() = v; });
    t["pose.rotation_deg"] = num([](ScenarioConfig& c, double v) {
      c.pose.rotation_deg = geometry::normalize_degrees(v);
    });
    // sim / material
    t["sim.dt"] = num([](ScenarioConfig& c, double v) { c.sim.dt = v; });
    t["sim.grid_width"] = num([](ScenarioConfig& c, double v) { c.sim.grid_width = v; });
    t["sim.boundary_margin"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                                  ScenarioConfig& c, SensorOverrides&) {
      c.sim.boundary_margin = r.scalar<int>(n, k);
    };
    t["sim.rest_threshold"] = num([](ScenarioConfig& c, double v) { c.sim.rest_threshold = v; });
    t["sim.rest_limit"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                             ScenarioConfig& c, SensorOverrides&) {
      c.sim.rest_limit = r.scalar<int>(n, k);
    };
    t["sim.pin_fraction"] = num([](ScenarioConfig& c, double v) { c.sim.pin_fraction = v; });
    t["sim.lateral_padding"] = num([](ScenarioConfig& c, double v) { c.lateral_padding = v; });
    t["material.youngs_modulus"] =
        num([](ScenarioConfig& c, double v) { c.material.youngs_modulus = v; });
    t["material.poisson_ratio"] =
        num([](ScenarioConfig& c, double v) { c.material.poisson_ratio = v; });
    // trajectory
    t["trajectory.kind"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                              ScenarioConfig& c, SensorOverrides&) {
      const auto s = r.scalar<std::string>(n, k);
      if (s == "press") c.trajectory.kind = TrajectoryKind::Press;
      else if (s == "slip") c.trajectory.kind = TrajectoryKind::Slip;
      else if (s == "rotation") c.trajectory.kind = TrajectoryKind::Rotation;
      else if (s == "custom") c.trajectory.kind = TrajectoryKind::Custom;
      else r.error(n, k, "unknown kind '" + s + "' (press, slip, rotation, custom)");
    };
    t["trajectory.shapes"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                                ScenarioConfig& c, SensorOverrides&) {
      c.trajectory.shapes.clear();
      for (const auto& name : r.strings(n, k)) {
        try {
          c.trajectory.shapes.push_back(catalogue_shape(name));
        } catch (const Error& e) {
          r.error(n, k, e.what());
        }
      }
    };
    t["trajectory.magnitudes"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                                    ScenarioConfig& c, SensorOverrides&) {
      c.trajectory.magnitudes = r.numbers(n, k);
      for (double v : c.trajectory.magnitudes) {
        if (v < 0.0) r.error(n, k, "values must be >= 0, got " + fmt(v));
      }
    };
    t["trajectory.press_depth"] = num([](ScenarioConfig& c, double v) {
      if (v < 0.0) fail(ErrorKind::Validation, "must be >= 0");
      c.trajectory.press_depth = v;
    });
    t["trajectory.directions"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                                    ScenarioConfig& c, SensorOverrides&) {
      c.trajectory.directions = r.strings(n, k);
    };
    t["trajectory.grid"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                              ScenarioConfig& c, SensorOverrides&) {
      const auto v = r.numbers(n, k);
      if (v.size() != 2 || v[0] < 1 || v[1] < 1) r.error(n, k, "expected [nx, ny] >= 1");
      c.trajectory.grid_nx = static_cast<int>(v[0]);
      c.trajectory.grid_ny = static_cast<int>(v[1]);
    };
    t["trajectory.grid_spacing"] = num([](ScenarioConfig& c, double v) { c.trajectory.grid_spacing = v; });
    t["trajectory.press_speed"] = num([](ScenarioConfig& c, double v) { c.trajectory.press_speed = v; });
    t["trajectory.slide_speed"] = num([](ScenarioConfig& c, double v) { c.trajectory.slide_speed = v; });
    t["trajectory.rotate_speed"] = num([](ScenarioConfig& c, double v) { c.trajectory.rotate_speed = v; });
    t["trajectory.settle"] = num([](ScenarioConfig& c, double v) {
      if (v < 0.0) fail(ErrorKind::Validation, "must be >= 0");
      c.trajectory.settle = v;
    });
    t["trajectory.phases"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                                ScenarioConfig& c, SensorOverrides&) {
      if (!n.IsSequence()) r.error(n, k, "expected a list of phases");
      c.trajectory.custom.clear();
      for (const auto& e : n) {
        if (!e.IsMap()) r.error(e, k, "each phase is a map");
        TrajectoryPhase p;
        for (const auto& kv : e) {
          const auto key = kv.first.as<std::string>();
          const std::string full = k + "." + key;
          if (key == "kind") {
            const auto s = r.scalar<std::string>(kv.second, full);
            if (s == "press") p.kind = PhaseKind::Press;
            else if (s == "slide") p.kind = PhaseKind::Slide;
            else if (s == "rotate") p.kind = PhaseKind::Rotate;
            else if (s == "dwell") p.kind = PhaseKind::Dwell;
            else r.error(kv.second, full, "unknown phase kind '" + s + "'");
          } else if (key == "magnitude") {
            p.magnitude = r.number(kv.second, full);
            if (p.magnitude < 0.0) r.error(kv.second, full, "must be >= 0");
          } else if (key == "speed") {
            p.speed = r.number(kv.second, full);
          } else if (key == "capture") {
            p.capture = r.scalar<bool>(kv.second, full);
          } else if (key == "direction_deg") {
            p.direction_deg = r.number(kv.second, full);
          } else if (key == "spin") {
            const auto s = r.scalar<std::string>(kv.second, full);
            if (s == "ccw") p.spin = 1;
            else if (s == "cw") p.spin = -1;
            else r.error(kv.second, full, "expected cw or ccw");
          } else {
            r.error(kv.first, full, "unknown key");
          }
        }
        c.trajectory.custom.push_back(p);
      }
    };
    // render
    t["render.spp"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                         ScenarioConfig& c, SensorOverrides&) { c.spp = r.scalar<int>(n, k); };
    t["render.max_bounces"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                                 ScenarioConfig& c, SensorOverrides&) {
      c.max_bounces = r.scalar<int>(n, k);
    };
    t["render.path_traced"] = flag([](ScenarioConfig& c, bool v) { c.path_traced = v; });
    t["render.phong"] = flag([](ScenarioConfig& c, bool v) { c.phong = v; });
    t["render.write_obj"] = flag([](ScenarioConfig& c, bool v) { c.write_obj = v; });
    t["render.enabled"] = flag([](ScenarioConfig& c, bool v) { c.render_images = v; });
    t["render.texture"] = [](const Reader& r, const YAML::Node& n, const std::string& k,
                             ScenarioConfig& c, SensorOverrides&) {
      c.texture = r.scalar<std::string>(n, k);
    };
    t["render.perturb_amplitude"] = num([](ScenarioConfig& c, double v) {
      if (v < 0.0) fail(ErrorKind::Validation, "must be >= 0");
      c.perturb_amplitude = v;
    });
    return t;
  }();
  return table;
}

void apply_sensor(ScenarioConfig& c, const SensorOverrides& s) {
  const std::string name = s.profile.empty() ? c.sensor.name : s.profile;
  if (!s.profile.empty() && s.profile != c.sensor.name) {
    const Raster r = sensor_raster(name, c.scale);
    c.sensor = render::make_profile(name, r.width, r.height, r.pitch);
  }
  bool relayout = false;
  if (s.width) c.sensor.width = *s.width, relayout = true;
  if (s.height) c.sensor.height = *s.height, relayout = true;
  if (s.pitch) c.sensor.pixel_pitch = *s.pitch, relayout = true;
  if (s.camera_height) c.sensor.camera_height = *s.camera_height, relayout = true;
  if (relayout) render::layout_profile(c.sensor);
  if (s.exposure) c.sensor.exposure = *s.exposure;
  if (s.light_scale) c.sensor.light_scale = *s.light_scale;
  if (s.gamma) c.sensor.gamma = *s.gamma;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"gelsight-press-sphere", "slip", "rotation", "press"};
}

ScenarioConfig make_preset(std::string_view name, std::string_view scale) {
  ScenarioConfig c;
  c.preset = std::string(name);
  if (name == "gelsight-press-sphere") {
    c.sensor.name = "gelsight";
    c.trajectory.kind = TrajectoryKind::Press;
    c.trajectory.shapes = {catalogue_shape("sphere")};
    c.trajectory.magnitudes = {1.0};
  } else if (name == "slip") {
    c.sensor.name = "slip-sensor";
    c.trajectory.kind = TrajectoryKind::Slip;
    for (const char* s : {"moon", "pacman", "dot_in", "sphere"}) {
      c.trajectory.shapes.push_back(catalogue_shape(s));
    }
    c.trajectory.directions = {"left", "right"};
    c.trajectory.magnitudes = {0, 1, 2, 3, 4, 5};
  } else if (name == "rotation") {
    c.sensor.name = "slip-sensor";
    c.trajectory.kind = TrajectoryKind::Rotation;
    for (const char* s : {"moon", "pacman", "dot_in"}) {
      c.trajectory.shapes.push_back(catalogue_shape(s));
    }
    c.trajectory.directions = {"cw", "ccw"};
    c.trajectory.magnitudes = {0, 5, 10, 15, 20, 25, 30, 35, 40, 45};
  } else if (name == "press") {
    c.sensor.name = "gelsight";
    c.trajectory.kind = TrajectoryKind::Press;
    c.trajectory.shapes = shape_catalogue();
    c.trajectory.grid_nx = 3;
    c.trajectory.grid_ny = 3;
    c.trajectory.magnitudes = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  } else if (name == "custom") {
    c.sensor.name = "gelsight";
    c.trajectory.shapes = {catalogue_shape("sphere")};
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    fail(ErrorKind::Validation,
         "unknown preset '" + std::string(name) + "' (available: " + known + ", custom)");
  }
  apply_scale(c, scale);
  return c;
}

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::Validation, what);
  };
  require(scale == "desk" || scale == "paper", "scale must be desk or paper");
  require((elastomer_extent.array() > 0.0).all(), "elastomer.extent must be positive");
  require((elastomer_counts.array() >= 2).all(), "elastomer.counts must be >= 2 per axis");
  require(elastomer_density > 0.0, "elastomer.density must be positive");
  require(object_density > 0.0, "object.density must be positive");
  require(object_spacing >= 0.0, "object.spacing must be >= 0");
  require(std::isfinite(object_band), "object.band must be finite");
  require(approach_gap >= 0.0, "object.approach_gap must be >= 0");
  require(lateral_padding >= 0.0, "sim.lateral_padding must be >= 0");
  require(spp >= 1, "render.spp must be >= 1");
  require(max_bounces >= 1, "render.max_bounces must be >= 1");
  require(perturb_amplitude >= 0.0, "render.perturb_amplitude must be >= 0");
  mpm::SimConfig probe = sim;
  probe.grid_dims = Vec3i(16, 16, 16);
  probe.validate();
  material.validate();
  for (const auto& s : trajectory.shapes) s.spec.validate();
  trajectory_expand(trajectory);
  require(sensor.width >= 2 && sensor.height >= 2, "sensor resolution must be >= 2x2");
  const double span_x = (sensor.width - 1) * sensor.pixel_pitch;
  const double span_y = (sensor.height - 1) * sensor.pixel_pitch;
  require(span_x <= elastomer_extent.x() && span_y <= elastomer_extent.y(),
          "sensor raster (" + fmt(span_x) + " x " + fmt(span_y) +
              " mm) is larger than the elastomer footprint");
}

std::string ScenarioConfig::canonical() const {
  std::ostringstream os;
  auto kv = [&](const std::string& k, const std::string& v) { os << k << '=' << v << '\n'; };
  auto v3 = [](const Vec3& v) { return fmt(v.x()) + "," + fmt(v.y()) + "," + fmt(v.z()); };
  kv("preset", preset);
  kv("scale", scale);
  kv("seed", std::to_string(seed));
  kv("rest_check", rest_check ? "true" : "false");
  kv("capture_every_step", capture_every_step ? "true" : "false");
  kv("sensor.profile", sensor.name);
  kv("sensor.size", std::to_string(sensor.width) + "x" + std::to_string(sensor.height));
  kv("sensor.pixel_pitch", fmt(sensor.pixel_pitch));
  kv("sensor.camera", v3(sensor.camera.position) + ";" + fmt(sensor.camera.vfov_deg));
  kv("sensor.exposure", fmt(sensor.exposure));
  kv("sensor.light_scale", fmt(sensor.light_scale));
  kv("sensor.gamma", sensor.gamma ? "true" : "false");
  for (std::size_t i = 0; i < sensor.lights.size(); ++i) {
    const auto& l = sensor.lights[i];
    std::string s;
    for (const auto& c : l.corners) s += v3(c) + ";";
    kv("sensor.light" + std::to_string(i), s + fmt(l.rgb[0]) + "," + fmt(l.rgb[1]) + "," + fmt(l.rgb[2]));
  }
  kv("elastomer.extent", v3(elastomer_extent));
  kv("elastomer.counts", std::to_string(elastomer_counts.x()) + "," +
                             std::to_string(elastomer_counts.y()) + "," +
                             std::to_string(elastomer_counts.z()));
  kv("elastomer.density", fmt(elastomer_density));
  kv("pose", fmt(pose.translation.x()) + "," + fmt(pose.translation.y()) + ";" +
                 fmt(pose.rotation_deg));
  kv("object.density", fmt(object_density));
  kv("object.spacing", fmt(object_spacing));
  kv("object.band", object_band < 0.0 ? "auto" : fmt(object_band));
  kv("object.approach_gap", fmt(approach_gap));
  kv("sim.dt", fmt(sim.dt));
  kv("sim.grid_width", fmt(sim.grid_width));
  kv("sim.boundary_margin", std::to_string(sim.boundary_margin));
  kv("sim.rest_threshold", fmt(sim.rest_threshold));
  kv("sim.rest_limit", std::to_string(sim.rest_limit));
  kv("sim.pin_fraction", fmt(sim.pin_fraction));
  kv("sim.lateral_padding", fmt(lateral_padding));
  kv("material.youngs_modulus", fmt(material.youngs_modulus));
  kv("material.poisson_ratio", fmt(material.poisson_ratio));
  const char* kinds[] = {"press", "slip", "rotation", "custom"};
  kv("trajectory.kind", kinds[static_cast<int>(trajectory.kind)]);
  for (const auto& s : trajectory.shapes) {
    const auto& p = s.spec;
    kv("trajectory.shape." + s.name,
       std::string(geometry::to_string(p.kind)) + ";" + fmt(p.radius) + ";" + fmt(p.height) + ";" +
           fmt(p.minor_radius) + ";" + fmt(p.inner_radius) + ";" + fmt(p.cut_radius) + ";" +
           fmt(p.cut_offset) + ";" + fmt(p.mouth_deg) + ";" + v3(p.size) + ";" +
           fmt(p.edge_round_radius));
  }
  kv("trajectory.magnitudes", join(trajectory.magnitudes));
  kv("trajectory.press_depth", fmt(trajectory.press_depth));
  std::string dirs;
  for (const auto& d : trajectory.directions) dirs += (dirs.empty() ? "" : ",") + d;
  kv("trajectory.directions", dirs);
  kv("trajectory.grid", std::to_string(trajectory.grid_nx) + "x" + std::to_string(trajectory.grid_ny));
  kv("trajectory.grid_spacing", fmt(trajectory.grid_spacing));
  kv("trajectory.speeds", fmt(trajectory.press_speed) + "," + fmt(trajectory.slide_speed) + "," +
                              fmt(trajectory.rotate_speed));
  kv("trajectory.settle", fmt(trajectory.settle));
  for (std::size_t i = 0; i < trajectory.custom.size(); ++i) {
    const auto& p = trajectory.custom[i];
    kv("trajectory.phase" + std::to_string(i),
       std::string(to_string(p.kind)) + ";" + fmt(p.magnitude) + ";" + fmt(p.speed) + ";" +
           (p.capture ? "capture" : "-") + ";" + fmt(p.direction_deg) + ";" + std::to_string(p.spin));
  }
  kv("render.spp", std::to_string(spp));
  kv("render.max_bounces", std::to_string(max_bounces));
  kv("render.path_traced", path_traced ? "true" : "false");
  kv("render.phong", phong ? "true" : "false");
  kv("render.write_obj", write_obj ? "true" : "false");
  kv("render.enabled", render_images ? "true" : "false");
  kv("render.texture", texture.string());
  kv("render.perturb_amplitude", fmt(perturb_amplitude));
  return os.str();
}

ScenarioConfig parse_scenario_text(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail(ErrorKind::Validation, origin + ":" + std::to_string(e.mark.line + 1) + ":" +
                                    std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  const Reader reader(origin);
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) reader.error(root, "<root>", "expected a mapping of sections");

  std::string preset = "custom";
  std::string scale = "desk";
  if (root["preset"]) preset = reader.scalar<std::string>(root["preset"], "preset");
  if (root["scale"]) scale = reader.scalar<std::string>(root["scale"], "scale");
  ScenarioConfig cfg;
  try {
    cfg = make_preset(preset, scale);
  } catch (const Error& e) {
    reader.error(root[root["preset"] ? "preset" : "scale"], root["preset"] ? "preset" : "scale",
                 e.what());
  }

  // Shape kind first so the dimension keys apply to the new shape.
  std::vector<std::pair<std::string, YAML::Node>> entries;
  std::vector<YAML::Node> key_nodes;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (key == "preset" || key == "scale") continue;
    if (kv.second.IsMap()) {
      for (const auto& inner : kv.second) {
        entries.emplace_back(key + "." + inner.first.as<std::string>(), inner.second);
        key_nodes.push_back(inner.first);
      }
    } else {
      entries.emplace_back(key, kv.second);
      key_nodes.push_back(kv.first);
    }
  }
  const auto& table = key_table();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!table.count(entries[i].first)) {
      std::string near;
      const auto section = entries[i].first.substr(0, entries[i].first.find('.') + 1);
      for (const auto& [k, _] : table) {
        if (!section.empty() && k.rfind(section, 0) == 0) near += (near.empty() ? "" : ", ") + k;
      }
      reader.error(key_nodes[i], entries[i].first,
                   "unknown key" + (near.empty() ? std::string() : " (known: " + near + ")"));
    }
  }
  auto priority = [](const std::string& k) {
    if (k == "trajectory.shapes") return 0;
    if (k == "shape.kind") return 1;
    return 2;
  };
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return priority(entries[a].first) < priority(entries[b].first);
  });

  SensorOverrides sensor;
  for (std::size_t i : order) {
    const auto& [key, node] = entries[i];
    try {
      table.at(key)(reader, node, key, cfg, sensor);
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (msg.rfind(origin + ":", 0) == 0) throw;
      reader.error(node, key, msg);
    }
  }
  apply_sensor(cfg, sensor);
  for (const auto& s : cfg.trajectory.shapes) {
    try {
      s.spec.validate();
    } catch (const Error& e) {
      fail(ErrorKind::Validation, origin + ": shape '" + s.name + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open scenario file '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_scenario_text(os.str(), path.string());
}

}  // namespace tacsim::scenario
