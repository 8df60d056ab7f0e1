#include <cmath>
#include <random>

#include <Eigen/SVD>
#include <doctest.h>

#include "tacsim/error.hpp"
#include "tacsim/mpm.hpp"
#include "tacsim/parallel.hpp"

using namespace tacsim;
using namespace tacsim::mpm;

namespace {

// Quadratic B-spline by hand, independent of the library's closed forms.
double spline_ref(double x) {
  x = std::abs(x);
  if (x < 0.5) return 0.75 - x * x;
  if (x < 1.5) return 0.5 * (1.5 - x) * (1.5 - x);
  return 0.0;
}

SimConfig small_config(int n = 16, int margin = 0) {
  SimConfig c;
  c.grid_width = 0.5;
  c.dt = 1e-4;
  c.grid_dims = Vec3i(n, n, n);
  c.origin = Vec3::Zero();
  c.boundary_margin = margin;
  return c;
}

Particle make_particle(const Vec3& x, const Vec3& v, Body body = Body::Elastomer) {
  Particle p;
  p.position = x;
  p.velocity = v;
  p.mass = 0.125;
  p.init_volume = 0.125;
  p.body = body;
  return p;
}

std::vector<Particle> random_cloud(std::mt19937_64& rng, int count, const SimConfig& c) {
  const double lo = 3.0 * c.grid_width;
  const double hi = (c.grid_dims.x() - 4) * c.grid_width;
  std::uniform_real_distribution<double> pos(lo, hi), vel(-50.0, 50.0), aff(-20.0, 20.0),
      mass(0.05, 2.0);
  std::vector<Particle> ps;
  for (int i = 0; i < count; ++i) {
    Particle p = make_particle({pos(rng), pos(rng), pos(rng)}, {vel(rng), vel(rng), vel(rng)});
    p.mass = mass(rng);
    for (int k = 0; k < 9; ++k) p.affine(k / 3, k % 3) = aff(rng);
    ps.push_back(p);
  }
  return ps;
}

Mat3 random_f(std::mt19937_64& rng, double jlo, double jhi) {
  std::uniform_real_distribution<double> u(-0.3, 0.3), j(jlo, jhi);
  for (;;) {
    Mat3 f = Mat3::Identity();
    for (int k = 0; k < 9; ++k) f(k / 3, k % 3) += u(rng);
    const double det = f.determinant();
    if (det <= 0.1) continue;
    return f * std::cbrt(j(rng) / det);
  }
}

double corotated_energy(const Mat3& f, double mu, double lambda) {
  Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU(), v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  const Mat3 r = u * v.transpose();
  const double j = f.determinant();
  return mu * (f - r).squaredNorm() + 0.5 * lambda * (j - 1.0) * (j - 1.0);
}

}  // namespace

TEST_CASE("material converts E and nu to Lame parameters") {
  MaterialParams m;
  CHECK(m.mu() == doctest::Approx(5e4));
  CHECK(m.lambda() == doctest::Approx(4.5e5));
  m.poisson_ratio = 0.5;
  CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("kernel weights at a node and partition of unity") {
  const auto w = kernel_weight(Vec3::Zero());
  for (int a = 0; a < 3; ++a) {
    CHECK(w[0][a] == doctest::Approx(0.125));
    CHECK(w[1][a] == doctest::Approx(0.75));
    CHECK(w[2][a] == doctest::Approx(0.125));
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int n = 0; n < 1000; ++n) {
    const Vec3 off(u(rng), u(rng), u(rng));
    const auto wt = kernel_weight(off);
    double sum = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) sum += wt[i].x() * wt[j].y() * wt[k].z();
    REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    for (int i = 0; i < 3; ++i) {
      REQUIRE(wt[i].x() == doctest::Approx(spline_ref(off.x() - (i - 1))).epsilon(1e-14));
    }
  }
  CHECK(bspline(0.0) == 0.75);
  CHECK(bspline(1.5) == 0.0);
}

TEST_CASE("corotated stress closed forms") {
  MaterialParams m;
  CHECK(compute_stress(Mat3::Identity(), m).norm() == 0.0);
  for (double s : {0.8, 1.0, 1.2}) {
    const Mat3 f = s * Mat3::Identity();
    const Mat3 expect = (2.0 * m.mu() * (s - 1.0) * s +
                         m.lambda() * s * s * s * (s * s * s - 1.0)) *
                        Mat3::Identity();
    CHECK((compute_stress(f, m) - expect).norm() <= 1e-9 * (1.0 + expect.norm()));
  }
  // Rotation alone is stress free.
  const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  CHECK(compute_stress(r, m).norm() <= 1e-6);
  CHECK((polar_rotation(r) - r).norm() <= 1e-12);
}

TEST_CASE("stress matches finite differences of the corotated energy") {
  MaterialParams m;
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const Mat3 f = random_f(rng, 0.5, 1.5);
    Mat3 p_fd;
    const double h = 1e-6;
    for (int k = 0; k < 9; ++k) {
      Mat3 fp = f, fm = f;
      fp(k / 3, k % 3) += h;
      fm(k / 3, k % 3) -= h;
      p_fd(k / 3, k % 3) = (corotated_energy(fp, m.mu(), m.lambda()) -
                            corotated_energy(fm, m.mu(), m.lambda())) / (2.0 * h);
    }
    const Mat3 tau_fd = p_fd * f.transpose();
    const Mat3 tau = compute_stress(f, m);
    worst = std::max(worst, (tau - tau_fd).cwiseAbs().maxCoeff() / tau_fd.cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("stress rejects inverted deformation") {
  MaterialParams m;
  Mat3 f = Mat3::Identity();
  f(2, 2) = -0.5;
  CHECK_THROWS_AS(compute_stress(f, m, 42), SimulationFault);
  try {
    compute_stress(f, m, 42);
  } catch (const SimulationFault& e) {
    CHECK(e.particle() == 42);
  }
}

TEST_CASE("P2G conserves mass and momentum of random clouds") {
  const SimConfig c = small_config();
  std::mt19937_64 rng(3);
  MaterialParams m;
  for (int trial = 0; trial < 10; ++trial) {
    auto ps = random_cloud(rng, 200, c);
    Grid g(c.grid_dims);
    particle_to_grid(ps, g, c, m);
    double mp = 0.0, mg = 0.0;
    Vec3 pp = Vec3::Zero(), pg = Vec3::Zero();
    for (const auto& p : ps) {
      mp += p.mass;
      pp += p.mass * p.velocity;
    }
    for (std::size_t n = 0; n < g.size(); ++n) {
      mg += g.mass()[n];
      pg += g.momentum()[n];
    }
    CHECK(std::abs(mg - mp) <= 1e-10 * mp);
    CHECK((pg - pp).norm() <= 1e-8 * pp.norm());

    compute_grid_velocities(g);
    grid_to_particle(g, ps, c);
    Vec3 after = Vec3::Zero();
    for (const auto& p : ps) after += p.mass * p.velocity;
    CHECK((after - pp).norm() <= 1e-8 * pp.norm());
  }
}

TEST_CASE("P2G single particle momentum and stencil impulse") {
  const SimConfig c = small_config();
  MaterialParams m;
  Particle p = make_particle({3.13, 2.71, 4.05}, {1.0, -2.0, 3.0});
  {
    Grid g(c.grid_dims);
    std::vector<Particle> one{p};
    particle_to_grid(one, g, c, m);
    Vec3 total = Vec3::Zero();
    for (const auto& mom : g.momentum()) total += mom;
    CHECK((total - p.mass * p.velocity).norm() <= 1e-12);
  }
  p.def_grad << 1.1, 0.05, 0.0, -0.02, 0.95, 0.03, 0.0, 0.01, 1.02;
  Grid g(c.grid_dims);
  std::vector<Particle> one{p};
  particle_to_grid(one, g, c, m);

  // Brute-force oracle over every node within reach.
  const Mat3 tau = compute_stress(p.def_grad, m);
  const double coeff = -4.0 * c.dt / (c.grid_width * c.grid_width) * p.init_volume;
  double worst = 0.0;
  Vec3 net = Vec3::Zero();
  for (int k = 0; k < c.grid_dims.z(); ++k) {
    for (int j = 0; j < c.grid_dims.y(); ++j) {
      for (int i = 0; i < c.grid_dims.x(); ++i) {
        const Vec3 xi = c.node_position({i, j, k});
        const Vec3 d = (xi - p.position) / c.grid_width;
        const double w = spline_ref(d.x()) * spline_ref(d.y()) * spline_ref(d.z());
        const Vec3 expect = w * (p.mass * p.velocity + coeff * tau * (xi - p.position));
        const Vec3 got = g.momentum()[g.linear({i, j, k})];
        worst = std::max(worst, (got - expect).norm());
        net += got - w * p.mass * p.velocity;
      }
    }
  }
  CHECK(worst <= 1e-10);
  // Internal forces of a single particle sum to zero.
  CHECK(net.norm() <= 1e-10);
}

TEST_CASE("G2P reconstructs uniform and linear velocity fields") {
  const SimConfig c = small_config();
  Grid g(c.grid_dims);
  Mat3 a;
  a << 0.3, -1.2, 0.5, 2.0, 0.1, -0.7, -0.4, 0.9, 0.25;
  const Vec3 v0(1.0, 2.0, -3.0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    g.velocity()[n] = v0 + a * c.node_position(g.unlinear(n));
  }
  std::vector<Particle> ps{make_particle({3.37, 4.11, 2.93}, Vec3::Zero())};
  grid_to_particle(g, ps, c);
  CHECK((ps[0].affine - a).norm() <= 1e-6);
  CHECK((ps[0].velocity - (v0 + a * ps[0].position)).norm() <= 1e-9);
  CHECK((ps[0].def_grad - (Mat3::Identity() + c.dt * a)).norm() <= 1e-9);

  for (auto& v : g.velocity()) v = v0;
  grid_to_particle(g, ps, c);
  CHECK((ps[0].velocity - v0).norm() <= 1e-12);
  CHECK(ps[0].affine.norm() <= 1e-9);
}

TEST_CASE("boundary margin zeroes only the outer layers") {
  SimConfig c = small_config(10, 2);
  Grid g(c.grid_dims);
  for (auto& v : g.velocity()) v = Vec3(1, 1, 1);
  apply_grid_boundaries(g, c);
  int zeroed = 0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Vec3i i = g.unlinear(n);
    const bool outer = (i.array() < 2).any() || (i.array() >= 8).any();
    CHECK((g.velocity()[n].isZero()) == outer);
    zeroed += outer;
  }
  CHECK(zeroed == 1000 - 216);
}

TEST_CASE("advection moves particles by v dt and enforces CFL") {
  const SimConfig c = small_config();
  std::vector<Particle> ps{make_particle({4, 4, 4}, {10.0, -5.0, 2.5})};
  for (int n = 0; n < 100; ++n) advect_particles(ps, c);
  CHECK((ps[0].position - Vec3(4.1, 3.95, 4.025)).norm() <= 1e-12);
  ps[0].velocity = Vec3(c.grid_width / c.dt, 0, 0);
  CHECK_THROWS_AS(advect_particles(ps, c), SimulationFault);
  ps[0].velocity.setZero();
  ps[0].position = Vec3(0.1, 4, 4);
  CHECK_THROWS_AS(advect_particles(ps, c), SimulationFault);
}

TEST_CASE("free block keeps its centroid") {
  SimConfig c = small_config(20, 0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  std::vector<Particle> ps;
  Vec3 mean_v = Vec3::Zero();
  for (int k = 0; k < 6; ++k)
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 6; ++i) {
        ps.push_back(make_particle(Vec3(3.5, 3.5, 3.5) + 0.25 * Vec3(i, j, k),
                                   {u(rng), u(rng), u(rng)}));
        mean_v += ps.back().velocity;
      }
  mean_v /= static_cast<double>(ps.size());
  for (auto& p : ps) p.velocity -= mean_v;
  Vec3 c0 = Vec3::Zero();
  for (const auto& p : ps) c0 += p.position;
  c0 /= static_cast<double>(ps.size());

  Solver s(c, MaterialParams{}, ps);
  for (int n = 0; n < 100; ++n) s.plain_step(RigidMotion{}, RestMonitor{});
  Vec3 c1 = Vec3::Zero();
  for (const auto& p : s.particles()) c1 += p.position;
  c1 /= static_cast<double>(ps.size());
  CHECK((c1 - c0).norm() <= 1e-8);
}

namespace {

// 8x8x4 elastomer slab with a 2x2x2 indenter block resting on top.
std::vector<Particle> slab_with_block(const SimConfig& c) {
  std::vector<Particle> ps;
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 8; ++i)
        ps.push_back(make_particle(Vec3(3.0, 3.0, 3.0) + 0.25 * Vec3(i, j, k), Vec3::Zero()));
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        Particle p = make_particle(Vec3(3.75, 3.75, 4.0) + 0.25 * Vec3(i, j, k), Vec3::Zero(),
                                   Body::Object);
        p.mass = 12.5;
        ps.push_back(p);
      }
  return ps;
}

}  // namespace

TEST_CASE("relative-rest loop honours the limit and pins") {
  SimConfig c = small_config(16, 2);
  c.rest_limit = 1;
  Solver s(c, MaterialParams{}, slab_with_block(c));
  s.pin_bottom(0.5);
  const auto mon = select_monitor(s.particles());
  CHECK(s.particles()[mon.object_probe].body == Body::Object);
  CHECK(s.particles()[mon.elastomer_probe].body == Body::Elastomer);
  const RigidMotion slide{Vec3(20.0, 0.0, 0.0), 0.0, Vec3::Zero()};
  const auto out = s.relative_rest_loop(slide, mon);
  CHECK(out.iterations == 1);
  CHECK(out.converged == (out.ratio <= c.rest_threshold));
  CHECK(s.steps() == 1);
  for (std::size_t p = 0; p < s.particles().size(); ++p) {
    if (s.pinned()[p]) CHECK(s.particles()[p].velocity.z() == 0.0);
  }

  SimConfig c2 = small_config(16, 2);
  Solver s2(c2, MaterialParams{}, slab_with_block(c2));
  s2.pin_bottom(0.5);
  const auto out2 = s2.relative_rest_loop(slide, mon);
  CHECK(out2.iterations >= 1);
  CHECK(out2.iterations <= c2.rest_limit);
  if (out2.converged) CHECK(out2.ratio <= c2.rest_threshold);
  else CHECK(out2.iterations == c2.rest_limit);
  const Vec3& vo = s2.particles()[mon.object_probe].velocity;
  const Vec3& ve = s2.particles()[mon.elastomer_probe].velocity;
  CHECK(std::hypot(ve.x() - vo.x(), ve.y() - vo.y()) / std::hypot(vo.x(), vo.y()) ==
        doctest::Approx(out2.ratio));
}

TEST_CASE("rest ratio guards a stationary probe") {
  SimConfig c = small_config(16, 2);
  auto ps = slab_with_block(c);
  const auto mon = select_monitor(ps);
  CHECK(rest_ratio(ps, mon, RigidMotion{Vec3(0, 0, -5), 0.0, Vec3::Zero()}) == 0.0);
  CHECK_THROWS_AS(rest_ratio(ps, mon, RigidMotion{Vec3(5, 0, 0), 0.0, Vec3::Zero()}), Error);
  try {
    rest_ratio(ps, mon, RigidMotion{Vec3(5, 0, 0), 0.0, Vec3::Zero()});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateProbe);
  }
}

TEST_CASE("pinning marks the lower half of the elastomer") {
  SimConfig c = small_config(16, 2);
  Solver s(c, MaterialParams{}, slab_with_block(c));
  s.pin_bottom(0.5);
  std::size_t pinned = 0;
  for (std::size_t p = 0; p < s.particles().size(); ++p) {
    if (s.pinned()[p]) {
      ++pinned;
      CHECK(s.particles()[p].body == Body::Elastomer);
      CHECK(s.particles()[p].position.z() <= 3.375 + 1e-9);
    }
  }
  CHECK(pinned == 128);
  s.pin_bottom(0.0);
  pinned = 0;
  for (auto f : s.pinned()) pinned += f;
  CHECK(pinned == 64);
}

TEST_CASE("solver results do not depend on the thread count") {
  SimConfig c = small_config(16, 2);
  const RigidMotion press{Vec3(0, 0, -20.0), 0.0, Vec3::Zero()};
  std::vector<std::vector<Particle>> out;
  for (int threads : {1, 3}) {
    set_thread_count(threads);
    Solver s(c, MaterialParams{}, slab_with_block(c));
    s.pin_bottom(0.5);
    const auto mon = select_monitor(s.particles());
    for (int n = 0; n < 20; ++n) s.relative_rest_loop(press, mon);
    out.push_back(s.particles());
  }
  set_thread_count(0);
  CHECK(encode_snapshot(out[0]) == encode_snapshot(out[1]));
}

TEST_CASE("translation by whole cells leaves dynamics unchanged") {
  SimConfig c = small_config(20, 2);
  const RigidMotion slide{Vec3(20.0, 0.0, -5.0), 0.0, Vec3::Zero()};
  auto run = [&](const Vec3& shift) {
    auto ps = slab_with_block(c);
    for (auto& p : ps) p.position += shift;
    Solver s(c, MaterialParams{}, ps);
    s.pin_bottom(0.5);
    const auto mon = select_monitor(s.particles());
    const Vec3 e0 = s.particles()[mon.elastomer_probe].position;
    for (int n = 0; n < 10; ++n) s.relative_rest_loop(slide, mon);
    return Vec3(s.particles()[mon.elastomer_probe].position - e0);
  };
  const Vec3 a = run(Vec3::Zero());
  const Vec3 b = run(Vec3(2, 1, 3) * c.grid_width);
  CHECK((a - b).norm() <= 1e-6);
}

TEST_CASE("progress meter tracks translation and unwrapped rotation") {
  std::vector<Particle> ps{make_particle({3, 0, 0}, Vec3::Zero(), Body::Object),
                           make_particle({3, 0, -1}, Vec3::Zero())};
  RestMonitor mon{0, 1};
  ProgressMeter meter(ps, mon, Vec3::Zero());
  double total = 0.0;
  const double step = 0.5 * M_PI / 180.0;
  for (int n = 0; n < 90; ++n) {
    total += step;
    ps[0].position = Vec3(3 * std::cos(total), 3 * std::sin(total), 0);
    meter.update(ps);
  }
  CHECK(meter.progress().rotation_deg == doctest::Approx(45.0).epsilon(1e-9));
  for (int n = 0; n < 700; ++n) {
    total += step;
    ps[0].position = Vec3(3 * std::cos(total), 3 * std::sin(total), 0);
    meter.update(ps);
  }
  CHECK(meter.progress().rotation_deg == doctest::Approx(395.0).epsilon(1e-9));

  ProgressMeter slide(ps, mon, Vec3::Zero());
  ps[0].position += Vec3(1.5, -0.5, 0.0);
  CHECK((slide.measure_progress(ps).displacement - Vec3(1.5, -0.5, 0.0)).norm() <= 1e-12);
}

TEST_CASE("snapshot round trip is bit exact") {
  std::mt19937_64 rng(9);
  auto ps = random_cloud(rng, 50, small_config());
  ps[3].body = Body::Object;
  ps[7].def_grad(1, 2) = 0.1234567890123;
  const auto bytes = encode_snapshot(ps);
  CHECK(bytes.size() == 4 + 4 + 8 + ps.size() * (8 * 26 + 1));
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MPMS");
  const auto back = decode_snapshot(bytes);
  CHECK(encode_snapshot(back) == bytes);
  REQUIRE(back.size() == ps.size());
  CHECK(back[7].def_grad(1, 2) == ps[7].def_grad(1, 2));
  CHECK(back[3].body == Body::Object);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_snapshot(bad), Error);
  bad = bytes;
  bad.resize(bytes.size() - 1);
  CHECK_THROWS_AS(decode_snapshot(bad), Error);
}
