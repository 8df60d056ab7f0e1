#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/polygon/voronoi.hpp>

#include "tacsim/error.hpp"
#include "tacsim/parallel.hpp"
#include "tacsim/surface.hpp"

namespace tacsim::surface {
namespace {

using IntPoint = boost::polygon::point_data<std::int32_t>;
using Tri = std::array<std::uint32_t, 3>;

// Integer lattice for the robust Voronoi builder: 10 nm resolution.
constexpr double kQuantum = 1e-5;

// Delaunay triangles as the dual of the Voronoi diagram. Vertices where more
// than three cells meet (cocircular sites) are fan-triangulated.
std::vector<Tri> delaunay(std::span<const Vec2> points, const Vec2& anchor,
                          std::vector<std::uint32_t>& site_ids) {
  std::vector<std::pair<IntPoint, std::uint32_t>> keyed;
  keyed.reserve(points.size());
  for (std::uint32_t k = 0; k < points.size(); ++k) {
    const Vec2 q = (points[k] - anchor) / kQuantum;
    if (std::abs(q.x()) > 2e9 || std::abs(q.y()) > 2e9) {
      fail(ErrorKind::Extraction, "surface particle too far from the raster");
    }
    keyed.emplace_back(IntPoint(static_cast<std::int32_t>(std::lround(q.x())),
                                static_cast<std::int32_t>(std::lround(q.y()))),
                       k);
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    return a.first.x() != b.first.x() ? a.first.x() < b.first.x() : a.first.y() < b.first.y();
  });
  std::vector<IntPoint> sites;
  site_ids.clear();
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i > 0 && keyed[i].first == keyed[i - 1].first) continue;
    sites.push_back(keyed[i].first);
    site_ids.push_back(keyed[i].second);
  }
  if (sites.size() < 3) fail(ErrorKind::Extraction, "fewer than 3 distinct surface particles");

  boost::polygon::voronoi_diagram<double> vd;
  boost::polygon::construct_voronoi(sites.begin(), sites.end(), &vd);

  std::vector<Tri> tris;
  std::vector<std::uint32_t> ring;
  for (const auto& vertex : vd.vertices()) {
    ring.clear();
    const auto* edge = vertex.incident_edge();
    do {
      ring.push_back(static_cast<std::uint32_t>(edge->cell()->source_index()));
      edge = edge->rot_next();
    } while (edge != vertex.incident_edge());
    for (std::size_t k = 1; k + 1 < ring.size(); ++k) {
      tris.push_back({site_ids[ring[0]], site_ids[ring[k]], site_ids[ring[k + 1]]});
    }
  }
  return tris;
}

}  // namespace

double DepthMap::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  return m;
}

DepthMap extract_surface_depth(std::span<const Vec3> current, std::span<const Vec3> rest,
                               const RasterSpec& raster) {
  if (current.size() != rest.size()) {
    fail(ErrorKind::Extraction, "surface particle lists differ in length");
  }
  if (current.size() < 3) fail(ErrorKind::Extraction, "fewer than 3 surface particles");
  if (raster.width < 1 || raster.height < 1 || !(raster.pitch > 0.0)) {
    fail(ErrorKind::Validation, "raster must have positive size and pitch");
  }

  std::vector<Vec2> xy(current.size());
  std::vector<double> depth(current.size());
  for (std::size_t k = 0; k < current.size(); ++k) {
    xy[k] = current[k].head<2>();
    depth[k] = rest[k].z() - current[k].z();
  }
  std::vector<std::uint32_t> site_ids;
  const std::vector<Tri> tris = delaunay(xy, raster.center, site_ids);

  // Bucket triangles by the raster pixels their bounding boxes cover.
  constexpr int kBlock = 4;
  const int bw = static_cast<int>((raster.width + kBlock - 1) / kBlock);
  const int bh = static_cast<int>((raster.height + kBlock - 1) / kBlock);
  const Vec2 origin = raster.pixel_position(0, 0);
  std::vector<std::vector<std::uint32_t>> buckets(static_cast<std::size_t>(bw) * bh);
  for (std::uint32_t t = 0; t < tris.size(); ++t) {
    Vec2 lo = xy[tris[t][0]], hi = lo;
    for (int c = 1; c < 3; ++c) {
      lo = lo.cwiseMin(xy[tris[t][c]]);
      hi = hi.cwiseMax(xy[tris[t][c]]);
    }
    const Vec2 plo = (lo - origin) / raster.pitch;
    const Vec2 phi = (hi - origin) / raster.pitch;
    const int i0 = std::max(0, static_cast<int>(std::floor(plo.x())) / kBlock);
    const int j0 = std::max(0, static_cast<int>(std::floor(plo.y())) / kBlock);
    const int i1 = std::min(bw - 1, static_cast<int>(std::ceil(phi.x())) / kBlock);
    const int j1 = std::min(bh - 1, static_cast<int>(std::ceil(phi.y())) / kBlock);
    if (phi.x() < 0 || phi.y() < 0) continue;
    for (int bj = j0; bj <= j1; ++bj)
      for (int bi = i0; bi <= i1; ++bi) buckets[bj * bw + bi].push_back(t);
  }

  DepthMap out;
  out.width = raster.width;
  out.height = raster.height;
  out.pixel_pitch = raster.pitch;
  out.values.assign(static_cast<std::size_t>(raster.width) * raster.height, 0.0);

  parallel_for(0, raster.height, [&](std::size_t j0, std::size_t j1) {
    for (auto j = static_cast<std::uint32_t>(j0); j < j1; ++j) {
      for (std::uint32_t i = 0; i < raster.width; ++i) {
        const Vec2 p = raster.pixel_position(i, j);
        const auto& bucket = buckets[(j / kBlock) * bw + (i / kBlock)];
        bool found = false;
        double value = 0.0;
        for (std::uint32_t t : bucket) {
          const Vec2& a = xy[tris[t][0]];
          const Vec2& b = xy[tris[t][1]];
          const Vec2& c = xy[tris[t][2]];
          const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
          if (std::abs(area) < 1e-18) continue;
          const double l1 = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
          const double l2 = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
          const double l3 = 1.0 - l1 - l2;
          constexpr double kTol = -1e-12;
          if (l1 >= kTol && l2 >= kTol && l3 >= kTol) {
            value = l1 * depth[tris[t][0]] + l2 * depth[tris[t][1]] + l3 * depth[tris[t][2]];
            found = true;
            break;
          }
        }
        if (!found) {
          double best = std::numeric_limits<double>::infinity();
          for (std::uint32_t k : site_ids) {
            const double d2 = (xy[k] - p).squaredNorm();
            if (d2 < best) {
              best = d2;
              value = depth[k];
            }
          }
        }
        out.at(i, j) = value;
      }
    }
  });
  return out;
}

DepthMap perturb_depth(const DepthMap& depth, double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0)) fail(ErrorKind::Validation, "perturbation amplitude must be >= 0");
  DepthMap out = depth;
  if (amplitude == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-amplitude, amplitude);
  for (double& v : out.values) v += noise(rng);
  return out;
}

}  // namespace tacsim::surface
