#include <cmath>

#include "mpm/stencil.hpp"
#include "tacsim/error.hpp"
#include "tacsim/mpm.hpp"
#include "tacsim/parallel.hpp"

namespace tacsim::mpm {

void SimConfig::validate() const {
  if (!(grid_width > 0.0)) fail(ErrorKind::Validation, "grid_width must be positive");
  if (!(dt > 0.0)) fail(ErrorKind::Validation, "dt must be positive");
  if ((grid_dims.array() < 3).any()) {
    fail(ErrorKind::Validation, "grid_dims must be at least 3 per axis");
  }
  if (boundary_margin < 0 || 2 * boundary_margin >= grid_dims.minCoeff()) {
    fail(ErrorKind::Validation, "boundary_margin leaves no interior nodes");
  }
  if (!(rest_threshold > 0.0)) fail(ErrorKind::Validation, "rest_threshold must be positive");
  if (rest_limit < 1) fail(ErrorKind::Validation, "rest_limit must be at least 1");
  if (!(pin_fraction >= 0.0 && pin_fraction <= 1.0)) {
    fail(ErrorKind::Validation, "pin_fraction must lie in [0, 1]");
  }
}

Grid::Grid(const Vec3i& dims) : dims_(dims) {
  const auto n = static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
  mass_.assign(n, 0.0);
  momentum_.assign(n, Vec3::Zero());
  velocity_.assign(n, Vec3::Zero());
}

void Grid::clear() {
  std::fill(mass_.begin(), mass_.end(), 0.0);
  std::fill(momentum_.begin(), momentum_.end(), Vec3::Zero());
  std::fill(velocity_.begin(), velocity_.end(), Vec3::Zero());
}

Vec3i Grid::unlinear(std::size_t n) const {
  const auto nx = static_cast<std::size_t>(dims_.x());
  const auto ny = static_cast<std::size_t>(dims_.y());
  return {static_cast<int>(n % nx), static_cast<int>((n / nx) % ny),
          static_cast<int>(n / (nx * ny))};
}

GridNode Grid::node(const Vec3i& i) const {
  const std::size_t n = linear(i);
  return {mass_[n], momentum_[n], velocity_[n], i};
}

namespace detail {

StencilPoint locate(const Vec3& position, const SimConfig& cfg, std::size_t id) {
  if (!position.allFinite()) throw SimulationFault("non-finite particle position", id);
  const Vec3 rel = (position - cfg.origin) / cfg.grid_width;
  StencilPoint s;
  for (int a = 0; a < 3; ++a) {
    const double b = std::floor(rel[a] - 0.5);
    if (b < 0.0 || b + 2.0 > cfg.grid_dims[a] - 1) {
      throw SimulationFault("particle outside the simulation domain", id);
    }
    s.base[a] = static_cast<int>(b);
    s.fx[a] = rel[a] - b;
  }
  s.w = kernel_weight(s.fx.array() - 1.0);
  return s;
}

}  // namespace detail

void particle_to_grid(std::span<const Particle> particles, Grid& grid, const SimConfig& cfg,
                      const MaterialParams& material) {
  const double w_cell = cfg.grid_width;
  const double stress_coeff = -4.0 * cfg.dt / (w_cell * w_cell);
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const Particle& pt = particles[p];
    const auto s = detail::locate(pt.position, cfg, p);
    Mat3 affine = pt.mass * pt.affine;
    if (pt.body == Body::Elastomer) {
      affine += stress_coeff * pt.init_volume * compute_stress(pt, material, p);
    }
    const Vec3 mv = pt.mass * pt.velocity;
    for (int k = 0; k < 3; ++k) {
      for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
          const double w = s.w[i].x() * s.w[j].y() * s.w[k].z();
          const Vec3 dpos = (Vec3(i, j, k) - s.fx) * w_cell;
          const std::size_t n = grid.linear(s.base + Vec3i(i, j, k));
          grid.mass()[n] += w * pt.mass;
          grid.momentum()[n] += w * (mv + affine * dpos);
        }
      }
    }
  }
}

void compute_grid_velocities(Grid& grid) {
  auto& mass = grid.mass();
  auto& mom = grid.momentum();
  auto& vel = grid.velocity();
  parallel_for(0, grid.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n) {
      vel[n] = mass[n] > 0.0 ? Vec3(mom[n] / mass[n]) : Vec3::Zero();
    }
  });
}

void apply_grid_boundaries(Grid& grid, const SimConfig& cfg) {
  const int m = cfg.boundary_margin;
  if (m <= 0) return;
  const Vec3i dims = grid.dims();
  auto& vel = grid.velocity();
  parallel_for(0, static_cast<std::size_t>(dims.z()), [&](std::size_t lo, std::size_t hi) {
    for (int k = static_cast<int>(lo); k < static_cast<int>(hi); ++k) {
      const bool kz = k < m || k >= dims.z() - m;
      for (int j = 0; j < dims.y(); ++j) {
        const bool ky = j < m || j >= dims.y() - m;
        for (int i = 0; i < dims.x(); ++i) {
          if (kz || ky || i < m || i >= dims.x() - m) {
            vel[grid.linear({i, j, k})] = Vec3::Zero();
          }
        }
      }
    }
  });
}

void grid_to_particle(const Grid& grid, std::span<Particle> particles, const SimConfig& cfg,
                      std::span<const Mat3> base_def_grad) {
  if (!base_def_grad.empty() && base_def_grad.size() != particles.size()) {
    fail(ErrorKind::Validation, "base_def_grad size does not match particle count");
  }
  const double w_cell = cfg.grid_width;
  const double c_scale = 4.0 / (w_cell * w_cell);
  const auto& vel = grid.velocity();
  parallel_for(0, particles.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      Particle& pt = particles[p];
      const auto s = detail::locate(pt.position, cfg, p);
      // v = sum w V and C = 4/W^2 sum w V (x_i - x_p)^T, accumulated as
      // sum w V (node offset)^T so the inner loop stays scalar.
      Vec3 v = Vec3::Zero();
      Mat3 b = Mat3::Zero();
      for (int k = 0; k < 3; ++k) {
        for (int j = 0; j < 3; ++j) {
          const double wjk = s.w[j].y() * s.w[k].z();
          const std::size_t row = grid.linear(s.base + Vec3i(0, j, k));
          for (int i = 0; i < 3; ++i) {
            const Vec3 wv = (s.w[i].x() * wjk) * vel[row + i];
            v += wv;
            b.col(0) += i * wv;
            b.col(1) += j * wv;
            b.col(2) += k * wv;
          }
        }
      }
      const Mat3 c = (c_scale * w_cell) * (b - v * s.fx.transpose());
      if (!v.allFinite() || !c.allFinite()) {
        throw SimulationFault("non-finite grid-to-particle update", p);
      }
      pt.velocity = v;
      pt.affine = c;
      if (pt.body == Body::Elastomer) {
        const Mat3& f0 = base_def_grad.empty() ? pt.def_grad : base_def_grad[p];
        pt.def_grad = (Mat3::Identity() + cfg.dt * c) * f0;
      }
    }
  });
}

void advect_particles(std::span<Particle> particles, const SimConfig& cfg) {
  parallel_for(0, particles.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      Particle& pt = particles[p];
      if (pt.velocity.norm() * cfg.dt >= cfg.grid_width) {
        throw SimulationFault("CFL bound violated (|v| dt >= W)", p);
      }
      pt.position += pt.velocity * cfg.dt;
      detail::locate(pt.position, cfg, p);
    }
  });
}

}  // namespace tacsim::mpm
