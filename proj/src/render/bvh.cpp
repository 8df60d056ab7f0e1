#include "render/bvh.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace tacsim::render {
namespace {

constexpr std::uint32_t kLeafSize = 4;
constexpr int kBins = 16;

bool slab_test(const Aabb& b, const Vec3& origin, const Vec3& inv_dir, double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    double near = (b.lo[a] - origin[a]) * inv_dir[a];
    double far = (b.hi[a] - origin[a]) * inv_dir[a];
    if (near > far) std::swap(near, far);
    // NaN from 0 * inf keeps the test conservative.
    if (!(near <= t1) && !std::isnan(near)) return false;
    if (!(far >= t0) && !std::isnan(far)) return false;
    if (near > t0) t0 = near;
    if (far < t1) t1 = far;
  }
  return t0 <= t1;
}

// Moller-Trumbore. Edges are widened by kEdgeSlack (barycentric units) so
// rays through a shared vertex or edge cannot slip between neighbours.
constexpr double kEdgeSlack = 1e-9;

bool hit_triangle(const Scene::Triangle& tri, const Vec3& origin, const Vec3& dir, double t_max,
                  double& t, double& b1, double& b2) {
  const Vec3 e1 = tri.p[1] - tri.p[0];
  const Vec3 e2 = tri.p[2] - tri.p[0];
  const Vec3 pv = dir.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-18) return false;
  const double inv = 1.0 / det;
  const Vec3 tv = origin - tri.p[0];
  const double u = tv.dot(pv) * inv;
  if (u < -kEdgeSlack || u > 1.0 + kEdgeSlack) return false;
  const Vec3 qv = tv.cross(e1);
  const double v = dir.dot(qv) * inv;
  if (v < -kEdgeSlack || u + v > 1.0 + kEdgeSlack) return false;
  const double tt = e2.dot(qv) * inv;
  if (tt <= 1e-9 || tt >= t_max) return false;
  t = tt;
  b1 = u;
  b2 = v;
  return true;
}

}  // namespace

Bvh::Bvh(const std::vector<Scene::Triangle>& tris) {
  const auto n = static_cast<std::uint32_t>(tris.size());
  order_.resize(n);
  std::vector<Aabb> boxes(n);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    order_[i] = i;
    for (const auto& p : tris[i].p) boxes[i].grow(p);
    centroids[i] = (tris[i].p[0] + tris[i].p[1] + tris[i].p[2]) / 3.0;
  }
  nodes_.reserve(2 * std::max<std::uint32_t>(1, n / kLeafSize) + 1);
  nodes_.emplace_back();
  if (n > 0) build(0, 0, n, boxes, centroids);
}

void Bvh::build(std::uint32_t node, std::uint32_t begin, std::uint32_t end,
                const std::vector<Aabb>& boxes, const std::vector<Vec3>& centroids) {
  Aabb box, cbox;
  for (std::uint32_t i = begin; i < end; ++i) {
    box.grow(boxes[order_[i]]);
    cbox.grow(centroids[order_[i]]);
  }
  nodes_[node].box = box;
  const std::uint32_t count = end - begin;
  auto make_leaf = [&] {
    nodes_[node].first = begin;
    nodes_[node].count = count;
  };
  if (count <= kLeafSize) return make_leaf();

  const Vec3 extent = cbox.hi - cbox.lo;
  int axis = 0;
  extent.maxCoeff(&axis);
  if (extent[axis] <= 0.0) return make_leaf();

  // Binned SAH along the widest centroid axis.
  std::array<Aabb, kBins> bin_box;
  std::array<std::uint32_t, kBins> bin_count{};
  const double scale = kBins / extent[axis];
  auto bin_of = [&](std::uint32_t tri) {
    const int b = static_cast<int>((centroids[tri][axis] - cbox.lo[axis]) * scale);
    return std::clamp(b, 0, kBins - 1);
  };
  for (std::uint32_t i = begin; i < end; ++i) {
    const int b = bin_of(order_[i]);
    bin_box[b].grow(boxes[order_[i]]);
    ++bin_count[b];
  }
  std::array<double, kBins - 1> left_cost{};
  Aabb acc;
  std::uint32_t acc_n = 0;
  for (int b = 0; b < kBins - 1; ++b) {
    acc.grow(bin_box[b]);
    acc_n += bin_count[b];
    left_cost[b] = acc_n ? acc.area() * acc_n : 0.0;
  }
  acc = Aabb();
  acc_n = 0;
  double best = std::numeric_limits<double>::infinity();
  int split = -1;
  for (int b = kBins - 1; b > 0; --b) {
    acc.grow(bin_box[b]);
    acc_n += bin_count[b];
    const double cost = left_cost[b - 1] + (acc_n ? acc.area() * acc_n : 0.0);
    if (cost < best) {
      best = cost;
      split = b;
    }
  }
  auto mid_it = std::stable_partition(order_.begin() + begin, order_.begin() + end,
                                      [&](std::uint32_t t) { return bin_of(t) < split; });
  auto mid = static_cast<std::uint32_t>(mid_it - order_.begin());
  if (mid == begin || mid == end) {
    mid = begin + count / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       if (centroids[a][axis] != centroids[b][axis]) {
                         return centroids[a][axis] < centroids[b][axis];
                       }
                       return a < b;
                     });
  }
  const auto left = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  nodes_.emplace_back();
  nodes_[node].first = left;
  nodes_[node].count = 0;
  build(left, begin, mid, boxes, centroids);
  build(left + 1, mid, end, boxes, centroids);
}

bool Bvh::intersect(const std::vector<Scene::Triangle>& tris, const Vec3& origin, const Vec3& dir,
                    double t_max, Scene::Hit& hit, bool any_hit) const {
  if (order_.empty()) return false;
  const Vec3 inv_dir = dir.cwiseInverse();
  std::array<std::uint32_t, 128> stack;
  int top = 0;
  stack[top++] = 0;
  bool found = false;
  double closest = t_max;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!slab_test(node.box, origin, inv_dir, closest)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        double t, b1, b2;
        if (hit_triangle(tris[order_[i]], origin, dir, closest, t, b1, b2)) {
          found = true;
          closest = t;
          hit.t = t;
          hit.triangle = order_[i];
          hit.b1 = b1;
          hit.b2 = b2;
          if (any_hit) return true;
        }
      }
    } else {
      stack[top++] = node.first;
      stack[top++] = node.first + 1;
    }
  }
  return found;
}

}  // namespace tacsim::render
