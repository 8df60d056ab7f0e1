#include <algorithm>
#include <cmath>
#include <limits>

#include "mpm/stencil.hpp"
#include "tacsim/error.hpp"
#include "tacsim/mpm.hpp"
#include "tacsim/parallel.hpp"

namespace tacsim::mpm {

Vec3 RigidMotion::velocity_at(const Vec3& x) const {
  const Vec3 r = x - center;
  return linear + Vec3(-angular_z * r.y(), angular_z * r.x(), 0.0);
}

bool RigidMotion::has_in_plane_motion() const {
  return std::hypot(linear.x(), linear.y()) >= 1e-12 || std::abs(angular_z) >= 1e-12;
}

RestMonitor select_monitor(std::span<const Particle> particles, const Vec3* rotation_center,
                           double min_off_center) {
  constexpr double kLayerTol = 1e-9;
  constexpr auto npos = std::numeric_limits<std::size_t>::max();
  std::size_t lowest = npos;
  for (std::size_t p = 0; p < particles.size(); ++p) {
    if (particles[p].body != Body::Object) continue;
    if (lowest == npos) {
      lowest = p;
      continue;
    }
    const Vec3& a = particles[p].position;
    const Vec3& b = particles[lowest].position;
    if (a.z() < b.z() - kLayerTol) {
      lowest = p;
    } else if (std::abs(a.z() - b.z()) <= kLayerTol &&
               (a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()))) {
      lowest = p;
    }
  }
  if (lowest == npos) fail(ErrorKind::Validation, "no object particles to monitor");

  if (rotation_center != nullptr) {
    auto off_center = [&](std::size_t p) {
      const Vec3 d = particles[p].position - *rotation_center;
      return std::hypot(d.x(), d.y());
    };
    if (off_center(lowest) < min_off_center) {
      const double z0 = particles[lowest].position.z();
      std::size_t best = lowest;
      for (std::size_t p = 0; p < particles.size(); ++p) {
        if (particles[p].body != Body::Object) continue;
        if (std::abs(particles[p].position.z() - z0) > kLayerTol) continue;
        if (off_center(p) > off_center(best)) best = p;
      }
      lowest = best;
    }
  }

  std::size_t nearest = npos;
  double best_d2 = std::numeric_limits<double>::infinity();
  const Vec3& xo = particles[lowest].position;
  for (std::size_t p = 0; p < particles.size(); ++p) {
    if (particles[p].body != Body::Elastomer) continue;
    const double d2 = (particles[p].position - xo).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      nearest = p;
    }
  }
  if (nearest == npos) fail(ErrorKind::Validation, "no elastomer particles to monitor");
  return {lowest, nearest};
}

double rest_ratio(std::span<const Particle> particles, const RestMonitor& monitor,
                  const RigidMotion& motion) {
  if (!motion.has_in_plane_motion()) return 0.0;
  const Vec3& vo = particles[monitor.object_probe].velocity;
  const Vec3& ve = particles[monitor.elastomer_probe].velocity;
  const double denom = std::hypot(vo.x(), vo.y());
  if (denom < 1e-12) {
    fail(ErrorKind::DegenerateProbe,
         "object probe has no in-plane velocity under a moving command");
  }
  return std::hypot(ve.x() - vo.x(), ve.y() - vo.y()) / denom;
}

Solver::Solver(SimConfig cfg, MaterialParams material, std::vector<Particle> particles)
    : cfg_(cfg), material_(material), particles_(std::move(particles)) {
  cfg_.validate();
  material_.validate();
  for (std::size_t p = 0; p < particles_.size(); ++p) {
    const Particle& pt = particles_[p];
    if (!(pt.mass > 0.0) || !(pt.init_volume > 0.0)) {
      fail(ErrorKind::Validation, "particle " + std::to_string(p) +
                                      " needs positive mass and volume");
    }
    detail::locate(pt.position, cfg_, p);
  }
  pinned_.assign(particles_.size(), 0);
  grid_ = Grid(cfg_.grid_dims);
  stress_.assign(particles_.size(), Mat3::Zero());
  base_F_.resize(particles_.size());
  for (std::size_t p = 0; p < particles_.size(); ++p) base_F_[p] = particles_[p].def_grad;
  cache_.resize(particles_.size());
  bin_items_.resize(particles_.size());
  bin_start_.assign(grid_.size() + 1, 0);
}

void Solver::pin_bottom(double pin_fraction) {
  double z_min = std::numeric_limits<double>::infinity();
  double z_max = -z_min;
  for (const auto& p : particles_) {
    if (p.body != Body::Elastomer) continue;
    z_min = std::min(z_min, p.position.z());
    z_max = std::max(z_max, p.position.z());
  }
  const double cut = z_min + pin_fraction * (z_max - z_min) + 1e-9;
  for (std::size_t p = 0; p < particles_.size(); ++p) {
    pinned_[p] = particles_[p].body == Body::Elastomer && particles_[p].position.z() <= cut;
  }
}

void Solver::clear_pins() { std::fill(pinned_.begin(), pinned_.end(), 0); }

void Solver::set_object_velocities(const RigidMotion& motion) {
  Mat3 spin = Mat3::Zero();
  spin(0, 1) = -motion.angular_z;
  spin(1, 0) = motion.angular_z;
  for (auto& p : particles_) {
    if (p.body != Body::Object) continue;
    p.velocity = motion.velocity_at(p.position);
    p.affine = spin;
  }
}

void Solver::cache_stress() {
  const double coeff = -4.0 * cfg_.dt / (cfg_.grid_width * cfg_.grid_width);
  parallel_for(0, particles_.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const Particle& pt = particles_[p];
      base_F_[p] = pt.def_grad;
      stress_[p] = pt.body == Body::Elastomer
                       ? Mat3(coeff * pt.init_volume * compute_stress(pt, material_, p))
                       : Mat3::Zero();
    }
  });
}

// Deterministic P2G: particles are counting-sorted by stencil base node
// (stable in particle order) and scattered slab by slab. A slab holds three
// base layers in z, so slabs of equal parity never touch the same nodes.
// Even slabs go first, then odd ones, each in sorted order, which fixes the
// summation order of every node independently of the thread count.
void Solver::gather_p2g() {
  const std::size_t np = particles_.size();
  std::vector<std::uint32_t> bin_of(np);
  parallel_for(0, np, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const Particle& pt = particles_[p];
      const auto s = detail::locate(pt.position, cfg_, p);
      Cached& c = cache_[p];
      c.fx = s.fx;
      c.w = s.w;
      c.mass = pt.mass;
      // mv + A (x_i - x_p) = (mv - A fx W) + (A W) o for stencil offset o.
      c.affine = (pt.mass * pt.affine + stress_[p]) * cfg_.grid_width;
      c.mv = pt.mass * pt.velocity - c.affine * s.fx;
      bin_of[p] = static_cast<std::uint32_t>(grid_.linear(s.base));
    }
  });

  std::fill(bin_start_.begin(), bin_start_.end(), 0);
  for (std::size_t p = 0; p < np; ++p) ++bin_start_[bin_of[p] + 1];
  for (std::size_t b = 1; b < bin_start_.size(); ++b) bin_start_[b] += bin_start_[b - 1];
  {
    std::vector<std::uint32_t> cursor(bin_start_.begin(), bin_start_.end() - 1);
    for (std::size_t p = 0; p < np; ++p) {
      bin_items_[cursor[bin_of[p]]++] = static_cast<std::uint32_t>(p);
    }
  }

  grid_.clear();
  const Vec3i dims = grid_.dims();
  const std::size_t layer = static_cast<std::size_t>(dims.x()) * dims.y();
  const std::size_t slabs = (static_cast<std::size_t>(dims.z()) + 2) / 3;
  auto& mass = grid_.mass();
  auto& mom = grid_.momentum();
  auto scatter_slab = [&](std::size_t slab) {
    const std::size_t b0 = std::min(3 * slab * layer, grid_.size());
    const std::size_t b1 = std::min(3 * (slab + 1) * layer, grid_.size());
    for (std::uint32_t it = bin_start_[b0]; it < bin_start_[b1]; ++it) {
      const Cached& c = cache_[bin_items_[it]];
      const std::size_t base = bin_of[bin_items_[it]];
      for (int k = 0; k < 3; ++k) {
        for (int j = 0; j < 3; ++j) {
          const double wjk = c.w[j].y() * c.w[k].z();
          const Vec3 qjk = c.mv + j * c.affine.col(1) + k * c.affine.col(2);
          const std::size_t row = base + k * layer + static_cast<std::size_t>(j) * dims.x();
          for (int i = 0; i < 3; ++i) {
            const double w = c.w[i].x() * wjk;
            mass[row + i] += w * c.mass;
            mom[row + i] += w * (qjk + i * c.affine.col(0));
          }
        }
      }
    }
  };
  for (std::size_t parity = 0; parity < 2; ++parity) {
    const std::size_t count = (slabs + 1 - parity) / 2;
    parallel_for(0, count, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t t = lo; t < hi; ++t) scatter_slab(2 * t + parity);
    });
  }
}

void Solver::apply_pins() {
  for (std::size_t p = 0; p < particles_.size(); ++p) {
    if (pinned_[p]) particles_[p].velocity.z() = 0.0;
  }
}

void Solver::transfer_cycle(bool use_cached_stress) {
  if (!use_cached_stress) cache_stress();
  gather_p2g();
  compute_grid_velocities(grid_);
  apply_grid_boundaries(grid_, cfg_);
  grid_to_particle(grid_, particles_, cfg_, base_F_);
}

void Solver::advect() {
  advect_particles(particles_, cfg_);
  ++steps_;
}

RestOutcome Solver::relative_rest_loop(const RigidMotion& motion, const RestMonitor& monitor) {
  if (!motion.linear.allFinite() || !std::isfinite(motion.angular_z)) {
    fail(ErrorKind::Validation, "commanded object velocity is not finite");
  }
  cache_stress();
  RestOutcome out;
  for (int it = 1; it <= cfg_.rest_limit; ++it) {
    set_object_velocities(motion);
    transfer_cycle(true);
    set_object_velocities(motion);
    apply_pins();
    out.iterations = it;
    out.ratio = rest_ratio(particles_, monitor, motion);
    if (out.ratio <= cfg_.rest_threshold) {
      out.converged = true;
      break;
    }
  }
  advect();
  return out;
}

RestOutcome Solver::plain_step(const RigidMotion& motion, const RestMonitor& monitor) {
  cache_stress();
  set_object_velocities(motion);
  transfer_cycle(true);
  set_object_velocities(motion);
  RestOutcome out;
  out.iterations = 1;
  out.ratio = rest_ratio(particles_, monitor, motion);
  out.converged = out.ratio <= cfg_.rest_threshold;
  advect();
  return out;
}

ProgressMeter::ProgressMeter(std::span<const Particle> particles, const RestMonitor& monitor,
                             const Vec3& rotation_center)
    : monitor_(monitor), center_(rotation_center),
      initial_(particles[monitor.object_probe].position) {
  const Vec3 r = initial_ - center_;
  last_angle_ = std::atan2(r.y(), r.x());
}

void ProgressMeter::update(std::span<const Particle> particles) {
  const Vec3& x = particles[monitor_.object_probe].position;
  progress_.displacement = x - initial_;
  const Vec3 r = x - center_;
  const double angle = std::atan2(r.y(), r.x());
  double delta = angle - last_angle_;
  if (delta > M_PI) delta -= 2.0 * M_PI;
  if (delta <= -M_PI) delta += 2.0 * M_PI;
  accumulated_ += delta;
  last_angle_ = angle;
  progress_.rotation_deg = accumulated_ * 180.0 / M_PI;
}

}  // namespace tacsim::mpm
