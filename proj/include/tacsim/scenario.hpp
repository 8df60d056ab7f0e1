#pragma once

// Scenario configuration, trajectory expansion and the end-to-end pipeline:
// particle setup -> IMPM stepping -> depth/mesh extraction -> rendering.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tacsim/geometry.hpp"
#include "tacsim/metrics.hpp"
#include "tacsim/mpm.hpp"
#include "tacsim/render.hpp"
#include "tacsim/surface.hpp"

namespace tacsim::scenario {

enum class PhaseKind { Press, Slide, Rotate, Dwell };
std::string_view to_string(PhaseKind kind);

struct TrajectoryPhase {
  PhaseKind kind = PhaseKind::Press;
  double magnitude = 0.0;  // mm (press/slide), degrees (rotate), seconds (dwell)
  double speed = 0.0;      // mm/s or deg/s; unused for dwell
  bool capture = false;
  double direction_deg = 0.0;  // slide heading in the sensor plane
  int spin = 1;                // rotate: +1 counter-clockwise, -1 clockwise
  double label = 0.0;          // cumulative magnitude used in file names
};

struct NamedShape {
  std::string name;
  geometry::ShapeSpec spec;
};

// One independent simulation: a shape at a location driven through phases.
struct Run {
  std::string shape_name;
  geometry::ShapeSpec shape;
  Vec2 location = Vec2::Zero();  // mm, relative to the elastomer center
  double rotation_deg = 0.0;
  std::string variant;  // direction or location tag, empty for single runs
  std::vector<TrajectoryPhase> phases;

  std::string directory() const;  // "<shape>" or "<shape>-<variant>"
  std::size_t captures() const;
};

enum class TrajectoryKind { Press, Slip, Rotation, Custom };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Press;
  std::vector<NamedShape> shapes;
  // Press: depths from contact. Slip: distances. Rotation: angles.
  std::vector<double> magnitudes{1.0};
  double press_depth = 0.5;             // initial press before slip/rotation
  std::vector<std::string> directions;  // slip: left/right/up/down, rotation: cw/ccw
  int grid_nx = 1;
  int grid_ny = 1;
  double grid_spacing = 3.0;  // mm between press locations
  double press_speed = 40.0;  // mm/s
  double slide_speed = 40.0;  // mm/s
  double rotate_speed = 600.0;  // deg/s
  double settle = 0.0;        // s of dwell before every capture
  std::vector<TrajectoryPhase> custom;  // used by TrajectoryKind::Custom
};

// Throws a validation error when the expansion has no capture.
std::vector<Run> trajectory_expand(const TrajectorySpec& spec);
std::size_t count_captures(const std::vector<Run>& runs);

// The 21 named press indenters and the 4 slip / 3 rotation shapes.
std::vector<NamedShape> shape_catalogue();
NamedShape catalogue_shape(std::string_view name);

struct ScenarioConfig {
  std::string preset = "custom";
  std::string scale = "desk";  // desk | paper
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  bool rest_check = true;          // false: plain MPM ablation
  bool capture_every_step = false;  // per-step depth maps between captures

  render::SensorProfile sensor = render::make_profile("gelsight", 160, 120, 0.1);

  // Offset and in-plane rotation added to every run's placement.
  geometry::Pose pose;

  Vec3 elastomer_extent{20.0, 20.0, 4.0};
  Vec3i elastomer_counts{101, 101, 21};
  double elastomer_density = 1.0;
  double object_density = 100.0;  // heavy so contact nodes follow the indenter
  double object_spacing = 0.0;  // 0: elastomer spacing
  // Indenter particles kept up to this height (mm) above its lowest point;
  // 0 keeps all, negative derives it from the press travel.
  double object_band = -1.0;
  double lateral_padding = 0.2;  // fraction of the elastomer footprint
  double approach_gap = 0.0;    // 0: one grid cell

  mpm::SimConfig sim;  // grid_dims and origin are derived per run
  mpm::MaterialParams material;

  TrajectorySpec trajectory;

  int spp = 32;
  int max_bounces = 4;
  bool path_traced = true;
  bool phong = false;
  bool write_obj = true;
  bool render_images = true;
  std::filesystem::path texture;  // empty: built-in base texture
  double perturb_amplitude = 1e-4;

  void validate() const;
  // Stable key=value text of every resolved setting; hashed into manifests.
  std::string canonical() const;
};

std::vector<std::string> preset_names();
// Applies a named preset ("gelsight-press-sphere", "slip", "rotation",
// "press") at the given scale.
ScenarioConfig make_preset(std::string_view name, std::string_view scale = "desk");

// YAML with sections; unknown keys are rejected with their line number.
ScenarioConfig parse_scenario_text(const std::string& text, const std::string& origin = "<text>");
ScenarioConfig parse_scenario(const std::filesystem::path& path);

// Built-in base texture: a light gray elastomer with faint low-frequency
// shading and speckle, deterministic for a given size.
render::Image default_texture(std::uint32_t width, std::uint32_t height);

// Initial particle state of one run: the elastomer block with its top layer
// tracked, and the indenter placed one approach gap above the rest surface.
struct World {
  std::vector<mpm::Particle> particles;
  std::vector<std::size_t> surface;  // top-layer elastomer particle indices
  std::vector<Vec3> rest_surface;
  mpm::SimConfig sim;          // with grid_dims and origin sized for the run
  Vec3 center = Vec3::Zero();  // indenter axis at the rest surface
  double approach = 0.0;       // travel until geometric contact
  std::size_t object_count = 0;
};
World build_world(const ScenarioConfig& cfg, const Run& run);

struct StepStats {
  std::uint64_t steps = 0;
  std::uint64_t transfer_cycles = 0;
  std::uint64_t converged_exits = 0;
  std::uint64_t limit_exits = 0;
  std::uint64_t ratio_violations = 0;  // in-plane steps exiting with ratio > threshold
  std::uint64_t in_plane_steps = 0;
  double max_converged_ratio = 0.0;
  double max_ratio = 0.0;
};

struct CaptureResult {
  std::string stem;  // "<preset>/<dir>/<index>_<magnitude>"
  double magnitude = 0.0;
  PhaseKind kind = PhaseKind::Press;
  mpm::Progress progress;       // object probe progress within the phase
  double phase_target = 0.0;
  surface::DepthMap depth;      // kept only when requested
  std::vector<std::filesystem::path> files;
};

struct RunResult {
  std::string directory;
  StepStats stats;
  double contact_offset = 0.0;  // mm travelled before first contact
  std::vector<CaptureResult> captures;
};

struct ManifestEntry {
  std::string path;  // relative to output_dir
  std::uint64_t fnv1a = 0;
  std::uint64_t bytes = 0;
};

struct PipelineResult {
  std::vector<RunResult> runs;
  std::vector<ManifestEntry> manifest;
  std::string config_hash;
  std::filesystem::path manifest_path;
};

struct PipelineOptions {
  bool keep_depth = false;     // keep depth maps in CaptureResult
  bool write_files = true;
  bool dry_run = false;        // expand and report captures only
  std::function<void(const std::string&)> log;
};

// Runs every expanded trajectory. On a simulation fault the last good
// particle state is written to <output>/<preset>/<dir>/last_good.mpms and
// the fault is rethrown.
PipelineResult run_pipeline(const ScenarioConfig& cfg, const PipelineOptions& options = {});

// Renders one depth map with the configured sensor and texture.
render::Image render_depth(const surface::DepthMap& depth, const render::SensorProfile& profile,
                           const render::Image& texture, bool phong, int spp, int max_bounces,
                           std::uint64_t seed);

struct CompareResult {
  std::vector<metrics::MetricsReport> rows;
  std::vector<std::string> unmatched;
  std::string csv;
};

// Pairs PNG files by relative path, aligns and scores each pair.
CompareResult compare_command(const std::filesystem::path& dir_a,
                              const std::filesystem::path& dir_b, int max_shift = 20);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string hex64(std::uint64_t v);

}  // namespace tacsim::scenario
