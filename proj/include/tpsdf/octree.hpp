// Adaptive octree over a padded bounding cube. Only cells that intersect the
// input surface are refined; leaves without triangles form the null region.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "tpsdf/mesh.hpp"

namespace tpsdf {

class FieldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cube centred on the mesh bounding box, edge = longest bbox side * (1 + padding).
Box3 bounding_cube(const Box3& bounds, double padding);

struct OctreeNode {
  Box3 box;
  std::array<std::uint32_t, 3> coord{};  // integer cell coordinate at `depth`
  std::uint8_t depth = 0;
  std::int32_t first_child = -1;  // children are first_child .. first_child + 7
  std::uint32_t tri_begin = 0;
  std::uint32_t tri_end = 0;

  bool is_leaf() const { return first_child < 0; }
  bool occupied() const { return is_leaf() && tri_end > tri_begin; }
};

class Octree {
 public:
  static constexpr int kMaxDepth = 12;

  /// Requires max_depth in [1, 12], padding >= 0 and a nonempty mesh.
  static Octree build(const TriangleMesh& mesh, int max_depth, double padding = 0.05);

  const Box3& root_box() const { return nodes_.front().box; }
  int max_depth() const { return max_depth_; }
  const std::vector<OctreeNode>& nodes() const { return nodes_; }
  const OctreeNode& node(std::size_t i) const { return nodes_[i]; }

  /// Local patch of a node: triangles overlapping its box, ascending.
  std::span<const std::uint32_t> triangles(const OctreeNode& n) const {
    return {tri_pool_.data() + n.tri_begin, n.tri_end - n.tri_begin};
  }

  std::vector<std::uint32_t> leaves() const;
  std::vector<std::uint32_t> occupied_leaves() const;

  /// Leaf reached by half-open (low-inclusive) descent; the root's upper faces
  /// belong to the last cell. Throws FieldError outside the root cube.
  std::uint32_t find_leaf(const Vec3& p) const;

  /// Every leaf whose closed box contains p, in ascending node order.
  void leaves_containing(const Vec3& p, std::vector<std::uint32_t>& out) const;

  /// World coordinate of lattice value `numerator / 2^depth` along an axis.
  double lattice_coordinate(int axis, std::uint64_t numerator, int depth) const;

 private:
  void subdivide(std::uint32_t node, const TriangleMesh& mesh);

  std::vector<OctreeNode> nodes_;
  std::vector<std::uint32_t> tri_pool_;
  int max_depth_ = 1;
};

}  // namespace tpsdf
