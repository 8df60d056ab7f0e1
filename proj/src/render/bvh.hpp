#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "tacsim/render.hpp"

namespace tacsim::render {

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  double area() const {
    const Vec3 d = (hi - lo).cwiseMax(0.0);
    return 2.0 * (d.x() * d.y() + d.y() * d.z() + d.z() * d.x());
  }
};

// Binned-SAH bounding volume hierarchy over scene triangles.
class Bvh {
 public:
  explicit Bvh(const std::vector<Scene::Triangle>& tris);

  bool intersect(const std::vector<Scene::Triangle>& tris, const Vec3& origin, const Vec3& dir,
                 double t_max, Scene::Hit& hit, bool any_hit) const;

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // child index for inner nodes, first triangle for leaves
    std::uint32_t count = 0;  // 0 for inner nodes
  };

  void build(std::uint32_t node, std::uint32_t begin, std::uint32_t end,
             const std::vector<Aabb>& boxes, const std::vector<Vec3>& centroids);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

}  // namespace tacsim::render
