#pragma once

// Improved material point method (IMPM) for the sensor elastomer.
//
// Quadratic B-spline transfers with APIC affine momentum, fixed-corotated
// elasticity, sticky domain boundaries, kinematic rigid indenters, and the
// relative-rest iteration that repeats the transfer cycle until the
// elastomer contact particle moves with the indenter.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tacsim/types.hpp"

namespace tacsim::mpm {

enum class Body : std::uint8_t { Elastomer = 0, Object = 1 };

struct Particle {
  Vec3 position = Vec3::Zero();   // mm
  Vec3 velocity = Vec3::Zero();   // mm/s
  double mass = 0.0;
  Mat3 affine = Mat3::Zero();     // C, 1/s
  Mat3 def_grad = Mat3::Identity();
  double init_volume = 0.0;       // mm^3
  Body body = Body::Elastomer;
};

struct MaterialParams {
  double youngs_modulus = 1.45e5;
  double poisson_ratio = 0.45;

  double mu() const;
  double lambda() const;
  void validate() const;
};

struct SimConfig {
  double grid_width = 0.4;  // W, mm
  double dt = 1e-4;         // s
  Vec3i grid_dims{64, 64, 32};
  Vec3 origin = Vec3::Zero();  // world position of node (0,0,0)
  int boundary_margin = 3;
  double rest_threshold = 0.05;
  int rest_limit = 50;
  double pin_fraction = 0.5;

  void validate() const;
  Vec3 node_position(const Vec3i& index) const {
    return origin + grid_width * index.cast<double>();
  }
};

struct GridNode {
  double mass = 0.0;
  Vec3 momentum = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3i index = Vec3i::Zero();
};

// Background Eulerian grid, stored as parallel arrays in x-fastest order.
class Grid {
 public:
  Grid() = default;
  explicit Grid(const Vec3i& dims);

  void clear();
  const Vec3i& dims() const { return dims_; }
  std::size_t size() const { return mass_.size(); }
  std::size_t linear(const Vec3i& i) const {
    return static_cast<std::size_t>(i.x()) +
           static_cast<std::size_t>(dims_.x()) *
               (static_cast<std::size_t>(i.y()) +
                static_cast<std::size_t>(dims_.y()) * static_cast<std::size_t>(i.z()));
  }
  Vec3i unlinear(std::size_t n) const;
  GridNode node(const Vec3i& i) const;

  std::vector<double>& mass() { return mass_; }
  std::vector<Vec3>& momentum() { return momentum_; }
  std::vector<Vec3>& velocity() { return velocity_; }
  const std::vector<double>& mass() const { return mass_; }
  const std::vector<Vec3>& momentum() const { return momentum_; }
  const std::vector<Vec3>& velocity() const { return velocity_; }

 private:
  Vec3i dims_ = Vec3i::Zero();
  std::vector<double> mass_;
  std::vector<Vec3> momentum_;
  std::vector<Vec3> velocity_;
};

// Quadratic B-spline N(x) for a signed distance x in grid cells.
double bspline(double x);

// Per-axis stencil weights. `offset` is the particle position relative to
// the center node of its 3x3x3 stencil, in cells, each component in
// [-0.5, 0.5). weights[k][axis] belongs to node (center - 1 + k).
using StencilWeights = std::array<Vec3, 3>;
StencilWeights kernel_weight(const Vec3& offset);

// Rotation factor of the polar decomposition F = R S (det F > 0).
Mat3 polar_rotation(const Mat3& f);

// Fixed-corotated Kirchhoff stress 2mu(F - R)F^T + lambda J (J - 1) I.
// Throws SimulationFault carrying `id` when J <= 0 or F is not finite.
Mat3 compute_stress(const Mat3& def_grad, const MaterialParams& m, std::size_t id = 0);
inline Mat3 compute_stress(const Particle& p, const MaterialParams& m, std::size_t id = 0) {
  return compute_stress(p.def_grad, m, id);
}

// Standalone transfer stages. The Solver below uses the same arithmetic with
// cached stress and a deterministic gather-ordered scatter.
void particle_to_grid(std::span<const Particle> particles, Grid& grid,
                      const SimConfig& cfg, const MaterialParams& material);
void compute_grid_velocities(Grid& grid);
void apply_grid_boundaries(Grid& grid, const SimConfig& cfg);
// When `base_def_grad` is non-empty the deformation gradient update starts
// from it instead of the particle's current F.
void grid_to_particle(const Grid& grid, std::span<Particle> particles,
                      const SimConfig& cfg, std::span<const Mat3> base_def_grad = {});
void advect_particles(std::span<Particle> particles, const SimConfig& cfg);

// Commanded rigid velocity field of the indenter: translation plus a spin
// about the sensor normal through `center`.
struct RigidMotion {
  Vec3 linear = Vec3::Zero();   // mm/s
  double angular_z = 0.0;       // rad/s, counter-clockwise seen from +z
  Vec3 center = Vec3::Zero();

  Vec3 velocity_at(const Vec3& x) const;
  bool has_in_plane_motion() const;
};

struct RestMonitor {
  std::size_t object_probe = 0;     // x_o
  std::size_t elastomer_probe = 0;  // x_e
};

// Lowest object particle (ties broken by smallest (x, y)), or for rotations
// the farthest lowest-layer object particle when the lowest one sits within
// `min_off_center` of the rotation axis. The elastomer probe is the nearest
// elastomer particle to it.
RestMonitor select_monitor(std::span<const Particle> particles,
                           const Vec3* rotation_center = nullptr,
                           double min_off_center = 0.0);

struct RestOutcome {
  int iterations = 0;
  bool converged = false;
  double ratio = 0.0;  // |v_e - v_o| / |v_o| over in-plane components
};

// In-plane velocity mismatch between the probes. Returns 0 when the
// commanded motion has no in-plane part.
double rest_ratio(std::span<const Particle> particles, const RestMonitor& monitor,
                  const RigidMotion& motion);

class Solver {
 public:
  Solver(SimConfig cfg, MaterialParams material, std::vector<Particle> particles);

  const SimConfig& config() const { return cfg_; }
  const MaterialParams& material() const { return material_; }
  const std::vector<Particle>& particles() const { return particles_; }
  std::vector<Particle>& particles() { return particles_; }
  const Grid& grid() const { return grid_; }
  const std::vector<std::uint8_t>& pinned() const { return pinned_; }
  std::uint64_t steps() const { return steps_; }

  // Marks elastomer particles whose initial height is within the lower
  // pin_fraction of the block; pin_fraction = 0 keeps only the bottom layer.
  void pin_bottom(double pin_fraction);
  void clear_pins();

  // One IMPM step: transfer cycles until the elastomer probe matches the
  // indenter in-plane (or rest_limit is hit), then one advection.
  RestOutcome relative_rest_loop(const RigidMotion& motion, const RestMonitor& monitor);

  // Plain MPM step for A/B comparisons: one transfer cycle, no pinning.
  RestOutcome plain_step(const RigidMotion& motion, const RestMonitor& monitor);

  // Single transfer cycle without advection; exposed for tests.
  void transfer_cycle(bool use_cached_stress);

 private:
  void set_object_velocities(const RigidMotion& motion);
  void cache_stress();
  void gather_p2g();
  void apply_pins();
  void advect();

  SimConfig cfg_;
  MaterialParams material_;
  std::vector<Particle> particles_;
  std::vector<std::uint8_t> pinned_;
  Grid grid_;
  std::vector<Mat3> stress_;       // coefficient-scaled stress term per particle
  std::vector<Mat3> base_F_;       // F at the start of the current step
  std::uint64_t steps_ = 0;

  // gather scratch
  struct Cached {
    Vec3 fx;
    StencilWeights w;
    double mass;
    Vec3 mv;
    Mat3 affine;
  };
  std::vector<Cached> cache_;
  std::vector<std::uint32_t> bin_start_;
  std::vector<std::uint32_t> bin_items_;
};

struct Progress {
  Vec3 displacement = Vec3::Zero();  // mm
  double rotation_deg = 0.0;         // signed, counter-clockwise positive
};

// Tracks the object probe from the start of a motion phase. Angles are
// unwrapped between successive updates.
class ProgressMeter {
 public:
  ProgressMeter(std::span<const Particle> particles, const RestMonitor& monitor,
                const Vec3& rotation_center);
  void update(std::span<const Particle> particles);
  Progress progress() const { return progress_; }
  Progress measure_progress(std::span<const Particle> particles) {
    update(particles);
    return progress_;
  }

 private:
  RestMonitor monitor_;
  Vec3 center_;
  Vec3 initial_;
  double last_angle_ = 0.0;
  double accumulated_ = 0.0;
  Progress progress_;
};

// "MPMS" particle snapshot, little-endian, bit-exact round trip.
std::vector<std::uint8_t> encode_snapshot(std::span<const Particle> particles);
std::vector<Particle> decode_snapshot(std::span<const std::uint8_t> bytes);
void save_snapshot(const std::filesystem::path& path, std::span<const Particle> particles);
std::vector<Particle> load_snapshot(const std::filesystem::path& path);

}  // namespace tacsim::mpm
