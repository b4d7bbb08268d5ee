// Closest-point queries, pseudo-normals, box/triangle overlap and the
// ray-parity inside test.
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "tpsdf/mesh.hpp"

namespace tpsdf {

enum class Feature : std::uint8_t { face, edge, vertex };

/// Closest point of a single triangle. `local` is the edge (0: v0v1, 1: v1v2,
/// 2: v2v0) or vertex index inside the triangle; unused for faces.
struct TrianglePoint {
  Vec3 point;
  double squared_distance = 0.0;
  Feature feature = Feature::face;
  int local = 0;
};

TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                        const Vec3& c);

struct ClosestPointResult {
  Vec3 point;
  double distance = 0.0;
  Vec3 normal;
  std::uint32_t primitive = 0;
  Feature feature = Feature::face;
};

/// Exact separating-axis test between a triangle and a box with positive
/// extent. Touching counts as overlap.
bool triangle_cell_overlap(const Vec3& a, const Vec3& b, const Vec3& c, const Box3& box);

/// Angle-weighted pseudo-normal at the closest feature, restricted to the
/// triangles in `subset`. Face features return the face normal.
Vec3 pseudo_normal(const TriangleMesh& mesh, std::span<const std::uint32_t> subset,
                   std::uint32_t primitive, Feature feature, int local);

/// Exhaustive closest point over a triangle subset; ties go to the lowest
/// triangle index. `subset` must be nonempty.
ClosestPointResult closest_point_linear(const Vec3& query, const TriangleMesh& mesh,
                                        std::span<const std::uint32_t> subset);

/// Bounding-volume hierarchy over a triangle subset supporting exact nearest
/// queries. Immutable after construction, safe for concurrent queries. The
/// mesh must outlive the index.
class SpatialIndex {
 public:
  struct Node {
    Box3 bounds;
    std::uint32_t left = 0;   // children, inner nodes only
    std::uint32_t right = 0;
    std::uint32_t first = 0;  // item range, leaves only
    std::uint32_t count = 0;  // 0 for inner nodes
    bool leaf() const { return count > 0; }
  };

  SpatialIndex(const TriangleMesh& mesh, std::vector<std::uint32_t> subset,
               std::uint32_t leaf_capacity = 4);
  /// Index over every triangle of the mesh.
  explicit SpatialIndex(const TriangleMesh& mesh);

  ClosestPointResult closest_point(const Vec3& query) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  std::span<const std::uint32_t> items() const { return items_; }
  std::uint32_t leaf_capacity() const { return leaf_capacity_; }
  std::size_t size() const { return items_.size(); }
  const TriangleMesh& mesh() const { return *mesh_; }

 private:
  std::uint32_t build(std::uint32_t begin, std::uint32_t end,
                      const std::vector<Vec3>& centroids);

  const TriangleMesh* mesh_;
  std::uint32_t leaf_capacity_;
  std::vector<std::uint32_t> items_;
  std::vector<Node> nodes_;
  // Pseudo-normals over the indexed subset, keyed by vertex id / edge key.
  std::unordered_map<std::uint32_t, Vec3> vertex_normals_;
  std::unordered_map<std::uint64_t, Vec3> edge_normals_;
};

/// Ray-crossing inside test for watertight meshes. Used as an independent
/// oracle for the sign of the field.
class ParityOracle {
 public:
  /// Throws MeshError unless every edge is shared by exactly two triangles.
  explicit ParityOracle(const TriangleMesh& mesh);

  /// Throws MeshError when the point lies within 1e-9 of the surface.
  bool inside(const Vec3& p) const;

 private:
  const TriangleMesh* mesh_;
  std::unique_ptr<SpatialIndex> index_;
};

bool inside_by_parity(const TriangleMesh& mesh, const Vec3& p);

/// Edge key with the smaller vertex id in the high word.
inline std::uint64_t edge_key(std::uint32_t u, std::uint32_t v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

}  // namespace tpsdf
