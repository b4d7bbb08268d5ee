#include "tpsdf/octree.hpp"

#include <algorithm>
#include <string>

#include "tpsdf/geometry.hpp"

namespace tpsdf {

Box3 bounding_cube(const Box3& bounds, double padding) {
  const Vec3 c = bounds.center();
  const Vec3 e = bounds.extent();
  double half = 0.5 * std::max({e.x, e.y, e.z}) * (1.0 + padding);
  if (!(half > 0.0)) half = 0.5;
  const Vec3 lo = c - Vec3{half, half, half};
  const double size = 2.0 * half;
  return {lo, lo + Vec3{size, size, size}};
}

Octree Octree::build(const TriangleMesh& mesh, int max_depth, double padding) {
  if (max_depth < 1 || max_depth > kMaxDepth) {
    throw FieldError("octree depth must be in [1, " + std::to_string(kMaxDepth) + "], got " +
                     std::to_string(max_depth));
  }
  if (!(padding >= 0.0)) throw FieldError("octree padding must be nonnegative");
  if (mesh.empty()) throw FieldError("cannot build an octree over an empty mesh");

  Octree tree;
  tree.max_depth_ = max_depth;
  OctreeNode root;
  root.box = bounding_cube(mesh.bounds(), padding);
  root.tri_begin = 0;
  for (std::uint32_t t = 0; t < mesh.num_triangles(); ++t) {
    if (triangle_cell_overlap(mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2),
                              root.box)) {
      tree.tri_pool_.push_back(t);
    }
  }
  root.tri_end = static_cast<std::uint32_t>(tree.tri_pool_.size());
  tree.nodes_.push_back(root);
  tree.subdivide(0, mesh);
  return tree;
}

double Octree::lattice_coordinate(int axis, std::uint64_t numerator, int depth) const {
  const Box3& root = nodes_.front().box;
  if (numerator == (1ULL << depth)) return root.max[axis];
  const double size = root.max[axis] - root.min[axis];
  const double fraction = static_cast<double>(numerator) / static_cast<double>(1ULL << depth);
  return root.min[axis] + fraction * size;
}

void Octree::subdivide(std::uint32_t id, const TriangleMesh& mesh) {
  const OctreeNode parent = nodes_[id];
  if (parent.depth >= max_depth_ || parent.tri_end == parent.tri_begin) return;

  const auto first = static_cast<std::int32_t>(nodes_.size());
  nodes_[id].first_child = first;
  const int depth = parent.depth + 1;
  for (int c = 0; c < 8; ++c) {
    OctreeNode child;
    child.depth = static_cast<std::uint8_t>(depth);
    for (int a = 0; a < 3; ++a) {
      child.coord[a] = 2 * parent.coord[a] + ((c >> a) & 1);
      child.box.min[a] = lattice_coordinate(a, child.coord[a], depth);
      child.box.max[a] = lattice_coordinate(a, child.coord[a] + 1, depth);
    }
    child.tri_begin = static_cast<std::uint32_t>(tri_pool_.size());
    for (auto i = parent.tri_begin; i < parent.tri_end; ++i) {
      const auto t = tri_pool_[i];
      if (triangle_cell_overlap(mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2),
                                child.box)) {
        tri_pool_.push_back(t);
      }
    }
    child.tri_end = static_cast<std::uint32_t>(tri_pool_.size());
    nodes_.push_back(child);
  }
  for (int c = 0; c < 8; ++c) subdivide(static_cast<std::uint32_t>(first + c), mesh);
}

std::vector<std::uint32_t> Octree::leaves() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf()) out.push_back(i);
  }
  return out;
}

std::vector<std::uint32_t> Octree::occupied_leaves() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].occupied()) out.push_back(i);
  }
  return out;
}

std::uint32_t Octree::find_leaf(const Vec3& p) const {
  if (!root_box().contains(p)) throw FieldError("point outside the octree root cube");
  std::uint32_t id = 0;
  while (!nodes_[id].is_leaf()) {
    const OctreeNode& n = nodes_[id];
    int child = 0;
    for (int a = 0; a < 3; ++a) {
      const double mid = lattice_coordinate(a, 2ULL * n.coord[a] + 1, n.depth + 1);
      if (p[a] >= mid) child |= 1 << a;
    }
    id = static_cast<std::uint32_t>(n.first_child + child);
  }
  return id;
}

void Octree::leaves_containing(const Vec3& p, std::vector<std::uint32_t>& out) const {
  out.clear();
  if (!root_box().contains(p)) return;
  // Explicit stack; at most 8 leaves are reported.
  std::uint32_t stack[8 * kMaxDepth + 8];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const std::uint32_t id = stack[--top];
    const OctreeNode& n = nodes_[id];
    if (n.is_leaf()) {
      out.push_back(id);
      continue;
    }
    int lo_hi[3][2];
    for (int a = 0; a < 3; ++a) {
      const double mid = lattice_coordinate(a, 2ULL * n.coord[a] + 1, n.depth + 1);
      lo_hi[a][0] = p[a] <= mid;
      lo_hi[a][1] = p[a] >= mid;
    }
    for (int c = 7; c >= 0; --c) {
      if (lo_hi[0][c & 1] && lo_hi[1][(c >> 1) & 1] && lo_hi[2][(c >> 2) & 1]) {
        stack[top++] = static_cast<std::uint32_t>(n.first_child + c);
      }
    }
  }
  std::sort(out.begin(), out.end());
}

}  // namespace tpsdf
