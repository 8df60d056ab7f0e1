#include <cmath>
#include <map>
#include <random>

#include <doctest.h>

#include "tacsim/error.hpp"
#include "tacsim/surface.hpp"

using namespace tacsim;
using namespace tacsim::surface;

namespace {

// Jittered lattice covering the raster with margin.
std::vector<Vec3> jittered_surface(std::mt19937_64& rng, int n, double spacing) {
  std::uniform_real_distribution<double> j(-0.2 * spacing, 0.2 * spacing);
  std::vector<Vec3> pts;
  for (int y = -n; y <= n; ++y)
    for (int x = -n; x <= n; ++x) pts.emplace_back(x * spacing + j(rng), y * spacing + j(rng), 0.0);
  return pts;
}

DepthMap ramp(std::uint32_t w, std::uint32_t h, double pitch, double slope) {
  DepthMap d;
  d.width = w;
  d.height = h;
  d.pixel_pitch = pitch;
  d.values.resize(static_cast<std::size_t>(w) * h);
  for (std::uint32_t j = 0; j < h; ++j)
    for (std::uint32_t i = 0; i < w; ++i) d.at(i, j) = slope * i * pitch;
  return d;
}

}  // namespace

TEST_CASE("flat surface extracts zero depth") {
  std::mt19937_64 rng(1);
  const auto rest = jittered_surface(rng, 12, 0.2);
  RasterSpec r{40, 30, 0.1, Vec2::Zero()};
  const auto d = extract_surface_depth(rest, rest, r);
  CHECK(d.width == 40);
  CHECK(d.height == 30);
  for (double v : d.values) REQUIRE(v == 0.0);
}

TEST_CASE("depth interpolates linear fields and hits particles exactly") {
  std::mt19937_64 rng(2);
  const auto rest = jittered_surface(rng, 12, 0.2);
  auto current = rest;
  // Linear depth field: interpolation on any triangulation reproduces it.
  for (auto& p : current) p.z() = -(0.3 + 0.1 * p.x() - 0.05 * p.y());
  RasterSpec r{21, 17, 0.1, Vec2(0.05, -0.02)};
  const auto d = extract_surface_depth(current, rest, r);
  double worst = 0.0;
  for (std::uint32_t j = 0; j < r.height; ++j) {
    for (std::uint32_t i = 0; i < r.width; ++i) {
      const Vec2 q = r.pixel_position(i, j);
      worst = std::max(worst, std::abs(d.at(i, j) - (0.3 + 0.1 * q.x() - 0.05 * q.y())));
    }
  }
  CHECK(worst <= 1e-9);

  // Particles placed on pixel centres carry their depth exactly.
  RasterSpec grid{9, 7, 0.25, Vec2::Zero()};
  std::vector<Vec3> on_px, rest_px;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::uint32_t j = 0; j < grid.height; ++j)
    for (std::uint32_t i = 0; i < grid.width; ++i) {
      const Vec2 q = grid.pixel_position(i, j);
      rest_px.emplace_back(q.x(), q.y(), 0.0);
      on_px.emplace_back(q.x(), q.y(), -u(rng));
    }
  const auto e = extract_surface_depth(on_px, rest_px, grid);
  for (std::size_t k = 0; k < on_px.size(); ++k) {
    REQUIRE(std::abs(e.values[k] + on_px[k].z()) <= 1e-9);
  }
}

TEST_CASE("depth values stay within the particle range") {
  std::mt19937_64 rng(3);
  const auto rest = jittered_surface(rng, 10, 0.25);
  auto current = rest;
  std::uniform_real_distribution<double> u(-0.2, 1.0);
  double lo = 1e9, hi = -1e9;
  for (auto& p : current) {
    p.z() = -u(rng);
    lo = std::min(lo, -p.z());
    hi = std::max(hi, -p.z());
  }
  const auto d = extract_surface_depth(current, rest, RasterSpec{50, 50, 0.1, Vec2::Zero()});
  for (double v : d.values) {
    REQUIRE(v >= lo);
    REQUIRE(v <= hi);
  }
  // Pixels beyond the hull fall back to the nearest particle.
  const auto far = extract_surface_depth(current, rest, RasterSpec{4, 4, 10.0, Vec2::Zero()});
  for (double v : far.values) CHECK(std::isfinite(v));
}

TEST_CASE("extraction rejects bad particle lists") {
  std::vector<Vec3> two{Vec3::Zero(), Vec3(1, 0, 0)};
  CHECK_THROWS_AS(extract_surface_depth(two, two, RasterSpec{}), Error);
  std::vector<Vec3> three{Vec3::Zero(), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  CHECK_THROWS_AS(extract_surface_depth(three, two, RasterSpec{}), Error);
}

TEST_CASE("perturbation is bounded and seeded") {
  DepthMap d = ramp(64, 48, 0.1, 0.0);
  const auto a = perturb_depth(d, 1e-4, 7);
  const auto b = perturb_depth(d, 1e-4, 7);
  const auto c = perturb_depth(d, 1e-4, 8);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  int equal_neighbours = 0;
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    REQUIRE(std::abs(a.values[k]) <= 1e-4);
    if (k > 0 && a.values[k] == a.values[k - 1]) ++equal_neighbours;
  }
  CHECK(equal_neighbours == 0);
  // Same generator and order, recomputed here.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e-4, 1e-4);
  CHECK(a.values[0] == u(rng));
}

TEST_CASE("mesh topology, UVs and normals") {
  const auto small = depth_to_mesh(ramp(2, 2, 1.0, 0.0));
  CHECK(small.vertices.size() == 4);
  CHECK(small.triangles.size() == 2);

  DepthMap big;
  big.width = 640;
  big.height = 480;
  big.pixel_pitch = 0.025;
  big.values.assign(640 * 480, 0.0);
  const auto m = depth_to_mesh(big);
  CHECK(m.vertices.size() == 307200);
  CHECK(m.triangles.size() == 612162);
  CHECK(m.uvs[0] == Vec2(0, 0));
  CHECK(m.uvs[639] == Vec2(1, 0));
  CHECK(m.uvs[479 * 640] == Vec2(0, 1));
  CHECK(m.uvs[479 * 640 + 639] == Vec2(1, 1));

  // Every interior edge is shared by exactly two triangles, boundary edges by one.
  const auto mesh = depth_to_mesh(ramp(7, 5, 0.5, 0.1));
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      auto a = t[e], b = t[(e + 1) % 3];
      edges[{std::min(a, b), std::max(a, b)}]++;
    }
  }
  auto same_border = [](std::uint32_t a, std::uint32_t b) {
    const auto ia = a % 7, ja = a / 7, ib = b % 7, jb = b / 7;
    return (ia == ib && (ia == 0 || ia == 6)) || (ja == jb && (ja == 0 || ja == 4));
  };
  for (const auto& [e, n] : edges) CHECK(n == (same_border(e.first, e.second) ? 1 : 2));

  // Depth 0.1 x puts the surface at z = -0.1 x, normal (0.1, 0, 1).
  const Vec3 expect = Vec3(0.1, 0.0, 1.0).normalized();
  for (const auto& n : mesh.normals) REQUIRE((n - expect).norm() <= 1e-12);
  for (const auto& t : mesh.triangles) {
    const Vec3 fn = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    REQUIRE(fn.z() > 0.0);
  }
}

TEST_CASE("DPTH round trip and quantization") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DepthMap d = ramp(13, 11, 0.1, 0.0);
  for (auto& v : d.values) v = u(rng);
  const auto bytes = encode_depth(d);
  CHECK(bytes.size() == 4 + 4 + 4 + 4 + 13 * 11 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DPTH");
  const auto back = decode_depth(bytes);
  const auto q = quantize(d);
  CHECK(back.values == q.values);
  CHECK(back.width == 13);
  CHECK(back.pixel_pitch == static_cast<double>(static_cast<float>(0.1)));
  CHECK(encode_depth(back) == bytes);
  CHECK(quantize(q).values == q.values);

  auto bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_depth(bad), Error);
  CHECK_THROWS_AS(load_depth("/nonexistent/x.dpth"), Error);
}

TEST_CASE("OBJ export lists vertices, texture coordinates, normals and faces") {
  const auto mesh = depth_to_mesh(ramp(3, 2, 1.0, 0.5));
  const auto obj = mesh_to_obj(mesh);
  auto count = [&](const std::string& prefix) {
    std::size_t n = 0, pos = 0;
    while ((pos = obj.find("\n" + prefix, pos)) != std::string::npos) {
      ++n;
      ++pos;
    }
    if (obj.rfind(prefix, 0) == 0) ++n;
    return n;
  };
  CHECK(count("v ") == 6);
  CHECK(count("vt ") == 6);
  CHECK(count("vn ") == 6);
  CHECK(count("f ") == 4);
  CHECK(obj.find("f 1/1/1 2/2/2 5/5/5") != std::string::npos);
}
