#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include <nlohmann/json.hpp>

#include "common/binary_io.hpp"
#include "tacsim/error.hpp"
#include "tacsim/scenario.hpp"

namespace tacsim::scenario {
namespace {

using mpm::Particle;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt + 0x9E3779B97F4A7C15ull + (seed << 6) + (seed >> 2));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::string magnitude_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

World build_world(const ScenarioConfig& c, const Run& run) {
  World w;
  const Vec3 ext = c.elastomer_extent;
  const Vec3 gel_lo(-0.5 * ext.x(), -0.5 * ext.y(), -ext.z());
  const auto gel = geometry::elastomer_block(ext, c.elastomer_counts, gel_lo, c.elastomer_density);
  const double s_gel = gel.spacing;
  const double s_obj = c.object_spacing > 0.0 ? c.object_spacing : s_gel;
  const double cell = c.sim.grid_width;

  auto obj = geometry::sample_particles(run.shape, geometry::Pose{Vec3::Zero(), run.rotation_deg},
                                        s_obj, c.object_density);
  double zmin = std::numeric_limits<double>::infinity();
  for (const auto& p : obj.positions) zmin = std::min(zmin, p.z());
  // Particles stand for cubes of their spacing, so surfaces touch when the
  // centers are half a spacing apart on each side.
  w.approach = c.approach_gap > 0.0 ? c.approach_gap : cell;
  double band = c.object_band;
  if (band < 0.0) {
    // Only the part that can reach the grid nodes around the gel matters.
    band = w.approach + s_obj + 3.0 * cell;
    for (const auto& ph : run.phases) {
      if (ph.kind == PhaseKind::Press) band += ph.magnitude;
    }
  }
  if (band > 0.0) {
    std::erase_if(obj.positions, [&](const Vec3& p) { return p.z() > zmin + band; });
  }
  const double lift = 0.5 * (s_gel + s_obj) + w.approach - zmin;
  const Vec3 offset(run.location.x(), run.location.y(), lift);
  for (auto& p : obj.positions) p += offset;
  w.center = Vec3(run.location.x(), run.location.y(), 0.0);

  // Domain: padded elastomer footprint plus the swept indenter footprint.
  Vec3 lo = gel_lo;
  Vec3 hi = gel_lo + ext;
  const Vec3 pad(0.5 * c.lateral_padding * ext.x(), 0.5 * c.lateral_padding * ext.y(), 0.0);
  lo -= pad;
  hi += pad;
  double reach = 0.0;
  Vec2 slide_lo = Vec2::Zero(), slide_hi = Vec2::Zero(), travel = Vec2::Zero();
  bool rotates = false;
  for (const auto& ph : run.phases) {
    if (ph.kind == PhaseKind::Slide) {
      const double a = ph.direction_deg * M_PI / 180.0;
      travel += ph.magnitude * Vec2(std::cos(a), std::sin(a));
      slide_lo = slide_lo.cwiseMin(travel);
      slide_hi = slide_hi.cwiseMax(travel);
    }
    if (ph.kind == PhaseKind::Rotate) rotates = true;
  }
  for (const auto& p : obj.positions) {
    reach = std::max(reach, (p - w.center).head<2>().norm());
    const Vec3 a = rotates ? Vec3(w.center.x() - reach, w.center.y() - reach, p.z()) : p;
    const Vec3 b = rotates ? Vec3(w.center.x() + reach, w.center.y() + reach, p.z()) : p;
    lo = lo.cwiseMin(a + Vec3(slide_lo.x(), slide_lo.y(), 0.0));
    hi = hi.cwiseMax(b + Vec3(slide_hi.x(), slide_hi.y(), 0.0));
  }
  mpm::SimConfig sim = c.sim;
  const int m = sim.boundary_margin;
  // The elastomer's bottom layer sits on the first node above the margin.
  sim.origin = Vec3(lo.x() - (m + 2) * cell, lo.y() - (m + 2) * cell, gel_lo.z() - m * cell);
  for (int a = 0; a < 3; ++a) {
    sim.grid_dims[a] = static_cast<int>(std::ceil((hi[a] - sim.origin[a]) / cell)) + m + 3;
  }
  w.sim = sim;

  w.particles = gel.to_particles();
  for (std::size_t id : gel.surface_ids) {
    w.surface.push_back(id);
    w.rest_surface.push_back(gel.positions[id]);
  }
  auto objp = obj.to_particles();
  w.object_count = objp.size();
  w.particles.insert(w.particles.end(), objp.begin(), objp.end());
  return w;
}

namespace {

class Writer {
 public:
  Writer(std::filesystem::path root, bool enabled) : root_(std::move(root)), enabled_(enabled) {}

  std::filesystem::path put(const std::string& rel, std::span<const std::uint8_t> bytes) {
    entries_.push_back({rel, fnv1a64(bytes), bytes.size()});
    const auto path = root_ / rel;
    if (enabled_) detail::write_file(path, bytes);
    return path;
  }
  const std::vector<ManifestEntry>& entries() const { return entries_; }
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  bool enabled_;
  std::vector<ManifestEntry> entries_;
};

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

render::Image default_texture(std::uint32_t width, std::uint32_t height) {
  render::Image img(width, height);
  std::mt19937_64 rng(0x7ac51u);
  std::uniform_int_distribution<int> speckle(-6, 6);
  for (std::uint32_t y = 0; y < height; ++y) {
    for (std::uint32_t x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / std::max(1u, width - 1);
      const double v = static_cast<double>(y) / std::max(1u, height - 1);
      const double shade = 8.0 * std::sin(2.0 * M_PI * (0.7 * u + 0.3 * v)) +
                           5.0 * std::cos(2.0 * M_PI * (1.3 * v - 0.4 * u));
      const int n = speckle(rng);
      for (int c = 0; c < 3; ++c) {
        const double base = 196.0 + 4.0 * c;
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(base + shade + n, 0.0, 255.0));
      }
    }
  }
  return img;
}

render::Image render_depth(const surface::DepthMap& depth, const render::SensorProfile& profile,
                           const render::Image& texture, bool phong, int spp, int max_bounces,
                           std::uint64_t seed) {
  if (depth.width != profile.width || depth.height != profile.height) {
    fail(ErrorKind::Validation, "depth map " + std::to_string(depth.width) + "x" +
                                    std::to_string(depth.height) + " does not match profile '" +
                                    profile.name + "' (" + std::to_string(profile.width) + "x" +
                                    std::to_string(profile.height) + ")");
  }
  const auto mesh = surface::depth_to_mesh(depth);
  const auto scene = render::build_scene(mesh, texture, profile);
  if (phong) return render::render_phong(scene);
  render::RenderSettings settings;
  settings.samples_per_pixel = spp;
  settings.max_bounces = max_bounces;
  settings.seed = seed;
  return render::render_path_traced(scene, settings);
}

PipelineResult run_pipeline(const ScenarioConfig& cfg, const PipelineOptions& opt) {
  cfg.validate();
  auto log = [&](const std::string& msg) {
    if (opt.log) opt.log(msg);
  };
  PipelineResult result;
  const std::string canonical = cfg.canonical();
  result.config_hash = hex64(fnv1a64(as_bytes(canonical)));

  auto runs = trajectory_expand(cfg.trajectory);
  for (auto& r : runs) {
    r.location += cfg.pose.translation.head<2>();
    r.rotation_deg = geometry::normalize_degrees(r.rotation_deg + cfg.pose.rotation_deg);
  }
  log("expanded " + std::to_string(runs.size()) + " runs, " +
      std::to_string(count_captures(runs)) + " captures");
  if (opt.dry_run) {
    for (const auto& r : runs) {
      RunResult rr;
      rr.directory = r.directory();
      for (std::size_t i = 0; i < r.phases.size(); ++i) {
        if (!r.phases[i].capture) continue;
        CaptureResult cap;
        char idx[16];
        std::snprintf(idx, sizeof idx, "%02zu", i);
        cap.stem = cfg.preset + "/" + rr.directory + "/" + idx + "_" +
                   magnitude_label(r.phases[i].label);
        cap.magnitude = r.phases[i].label;
        cap.kind = r.phases[i].kind;
        rr.captures.push_back(cap);
      }
      result.runs.push_back(std::move(rr));
    }
    return result;
  }

  render::Image texture;
  if (cfg.render_images) {
    texture = cfg.texture.empty() ? default_texture(cfg.sensor.width, cfg.sensor.height)
                                  : render::load_png(cfg.texture);
  }
  Writer writer(cfg.output_dir, opt.write_files);
  std::uint64_t capture_counter = 0;

  for (const auto& run : runs) {
    const auto t0 = std::chrono::steady_clock::now();
    World world = build_world(cfg, run);
    RunResult rr;
    rr.directory = run.directory();
    rr.contact_offset = world.approach;
    const std::string run_dir = cfg.preset + "/" + rr.directory;
    log(run_dir + ": " + std::to_string(world.particles.size()) + " particles (" +
        std::to_string(world.object_count) + " indenter), grid " +
        std::to_string(world.sim.grid_dims.x()) + "x" + std::to_string(world.sim.grid_dims.y()) +
        "x" + std::to_string(world.sim.grid_dims.z()));

    mpm::Solver solver(world.sim, cfg.material, std::move(world.particles));
    if (cfg.rest_check) solver.pin_bottom(cfg.sim.pin_fraction);
    const bool rotates = std::any_of(run.phases.begin(), run.phases.end(),
                                     [](const auto& p) { return p.kind == PhaseKind::Rotate; });
    const auto monitor = mpm::select_monitor(solver.particles(), rotates ? &world.center : nullptr,
                                             2.0 * cfg.sim.grid_width);
    mpm::ProgressMeter meter(solver.particles(), monitor, world.center);
    std::vector<Particle> last_good;
    StepStats& st = rr.stats;
    std::uint64_t frame = 0;

    auto capture = [&](const std::string& stem, double magnitude, PhaseKind kind,
                       const mpm::Progress& prog, double target) {
      CaptureResult cap;
      cap.stem = stem;
      cap.magnitude = magnitude;
      cap.kind = kind;
      cap.progress = prog;
      cap.phase_target = target;
      std::vector<Vec3> current(world.surface.size());
      for (std::size_t k = 0; k < world.surface.size(); ++k) {
        current[k] = solver.particles()[world.surface[k]].position;
      }
      surface::RasterSpec raster;
      raster.width = cfg.sensor.width;
      raster.height = cfg.sensor.height;
      raster.pitch = cfg.sensor.pixel_pitch;
      raster.center = Vec2::Zero();
      const std::uint64_t cseed = mix_seed(cfg.seed, capture_counter++);
      auto depth = surface::extract_surface_depth(current, world.rest_surface, raster);
      depth = surface::quantize(surface::perturb_depth(depth, cfg.perturb_amplitude, cseed));
      cap.files.push_back(writer.put(stem + ".dpth", surface::encode_depth(depth)));
      if (cfg.write_obj || cfg.render_images) {
        const auto mesh = surface::depth_to_mesh(depth);
        if (cfg.write_obj) cap.files.push_back(writer.put(stem + ".obj", as_bytes(surface::mesh_to_obj(mesh))));
        if (cfg.render_images) {
          const auto scene = render::build_scene(mesh, texture, cfg.sensor);
          if (cfg.path_traced) {
            render::RenderSettings rs;
            rs.samples_per_pixel = cfg.spp;
            rs.max_bounces = cfg.max_bounces;
            rs.seed = cseed;
            render::RenderStats stats;
            const auto img = render::render_path_traced(scene, rs, &stats);
            if (stats.rejected_samples > 0) {
              log(stem + ": rejected " + std::to_string(stats.rejected_samples) +
                  " non-finite radiance samples");
            }
            cap.files.push_back(writer.put(stem + ".png", render::encode_png(img)));
          }
          if (cfg.phong) {
            cap.files.push_back(
                writer.put(stem + "_phong.png", render::encode_png(render::render_phong(scene))));
          }
        }
      }
      if (opt.keep_depth) cap.depth = std::move(depth);
      return cap;
    };

    auto step = [&](const mpm::RigidMotion& motion) {
      last_good = solver.particles();
      const auto out = cfg.rest_check ? solver.relative_rest_loop(motion, monitor)
                                      : solver.plain_step(motion, monitor);
      ++st.steps;
      st.transfer_cycles += out.iterations;
      if (motion.has_in_plane_motion()) {
        ++st.in_plane_steps;
        st.max_ratio = std::max(st.max_ratio, out.ratio);
        if (out.ratio > cfg.sim.rest_threshold) ++st.ratio_violations;
      }
      if (cfg.rest_check) {
        if (out.converged) {
          ++st.converged_exits;
          st.max_converged_ratio = std::max(st.max_converged_ratio, out.ratio);
        } else {
          ++st.limit_exits;
        }
      }
      meter.update(solver.particles());
      if (st.steps % 50 == 0) {
        char buf[160];
        std::snprintf(buf, sizeof buf, ": step %llu, %d cycles, ratio %.4f, %llu limit exits",
                      static_cast<unsigned long long>(st.steps), out.iterations, out.ratio,
                      static_cast<unsigned long long>(st.limit_exits));
        log(run_dir + buf);
      }
      if (cfg.capture_every_step) {
        char name[32];
        std::snprintf(name, sizeof name, "/frames/%06llu", static_cast<unsigned long long>(frame++));
        capture(run_dir + name, 0.0, PhaseKind::Dwell, meter.progress(), 0.0);
      }
    };

    auto press = [&](double distance, double speed) {
      const double start = meter.progress().displacement.z();
      const mpm::RigidMotion motion{Vec3(0.0, 0.0, -speed), 0.0, world.center};
      while (start - meter.progress().displacement.z() + 0.5 * speed * cfg.sim.dt < distance) {
        step(motion);
      }
      return start - meter.progress().displacement.z();
    };
    auto dwell = [&](double seconds) {
      const auto n = static_cast<std::uint64_t>(std::llround(seconds / cfg.sim.dt));
      for (std::uint64_t i = 0; i < n; ++i) step(mpm::RigidMotion{Vec3::Zero(), 0.0, world.center});
    };

    try {
      press(world.approach, cfg.trajectory.press_speed);
      for (std::size_t i = 0; i < run.phases.size(); ++i) {
        const auto& ph = run.phases[i];
        const mpm::Progress before = meter.progress();
        double done = 0.0;
        switch (ph.kind) {
          case PhaseKind::Press:
            done = press(ph.magnitude, ph.speed);
            break;
          case PhaseKind::Slide: {
            const double a = ph.direction_deg * M_PI / 180.0;
            const Vec3 u(std::cos(a), std::sin(a), 0.0);
            const mpm::RigidMotion motion{ph.speed * u, 0.0, world.center};
            auto moved = [&] { return (meter.progress().displacement - before.displacement).dot(u); };
            while (moved() + 0.5 * ph.speed * cfg.sim.dt < ph.magnitude) step(motion);
            done = moved();
            break;
          }
          case PhaseKind::Rotate: {
            const double omega = ph.spin * ph.speed * M_PI / 180.0;
            const mpm::RigidMotion motion{Vec3::Zero(), omega, world.center};
            auto turned = [&] {
              return ph.spin * (meter.progress().rotation_deg - before.rotation_deg);
            };
            while (turned() + 0.5 * ph.speed * cfg.sim.dt < ph.magnitude) step(motion);
            done = turned();
            break;
          }
          case PhaseKind::Dwell:
            dwell(ph.magnitude);
            done = ph.magnitude;
            break;
        }
        if (ph.capture) {
          if (cfg.trajectory.settle > 0.0) dwell(cfg.trajectory.settle);
          char idx[16];
          std::snprintf(idx, sizeof idx, "%02zu", i);
          mpm::Progress within;
          within.displacement = meter.progress().displacement - before.displacement;
          within.rotation_deg = meter.progress().rotation_deg - before.rotation_deg;
          auto cap = capture(run_dir + "/" + idx + "_" + magnitude_label(ph.label), ph.label,
                             ph.kind, within, ph.magnitude);
          log(cap.stem + ": " + std::string(to_string(ph.kind)) + " " +
              magnitude_label(done) + " (target " + magnitude_label(ph.magnitude) + ")");
          rr.captures.push_back(std::move(cap));
        }
      }
    } catch (const SimulationFault&) {
      if (!last_good.empty() && opt.write_files) {
        mpm::save_snapshot(cfg.output_dir / run_dir / "last_good.mpms", last_good);
      }
      throw;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[160];
    std::snprintf(buf, sizeof buf, ": %llu steps, %llu transfer cycles, %.1f s",
                  static_cast<unsigned long long>(st.steps),
                  static_cast<unsigned long long>(st.transfer_cycles), secs);
    log(run_dir + buf);
    result.runs.push_back(std::move(rr));
  }

  result.manifest = writer.entries();
  nlohmann::ordered_json j;
  j["preset"] = cfg.preset;
  j["scale"] = cfg.scale;
  j["seed"] = cfg.seed;
  j["config_hash"] = result.config_hash;
  j["rest_check"] = cfg.rest_check;
  j["files"] = nlohmann::ordered_json::array();
  for (const auto& e : result.manifest) {
    j["files"].push_back({{"path", e.path}, {"fnv1a64", hex64(e.fnv1a)}, {"bytes", e.bytes}});
  }
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : result.runs) {
    j["runs"].push_back({{"directory", r.directory},
                         {"steps", r.stats.steps},
                         {"transfer_cycles", r.stats.transfer_cycles},
                         {"converged_exits", r.stats.converged_exits},
                         {"limit_exits", r.stats.limit_exits},
                         {"ratio_violations", r.stats.ratio_violations},
                         {"captures", r.captures.size()}});
  }
  result.manifest_path = cfg.output_dir / cfg.preset / "manifest.json";
  if (opt.write_files) {
    const std::string text = j.dump(2) + "\n";
    detail::write_file(result.manifest_path, as_bytes(text));
  }
  return result;
}

}  // namespace tacsim::scenario
