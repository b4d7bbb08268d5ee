// Null-aware marching cubes and light mesh post-processing.
#pragma once

#include <cstdint>
#include <vector>

#include "tpsdf/field.hpp"
#include "tpsdf/mesh.hpp"

namespace tpsdf {

/// Marching cubes output before null stripping. Vertices produced on an edge
/// with a null endpoint are kept (at the edge midpoint) but flagged invalid.
struct RawMcMesh {
  std::vector<Vec3> vertices;
  std::vector<std::uint8_t> valid;
  std::vector<Triangle> triangles;

  std::size_t invalid_count() const;
};

/// Classic 256-case marching cubes over the lattice. Null corners count as
/// outside (positive) for the case index; every sign-change edge touching a
/// null corner yields an invalid vertex. Vertices are shared per lattice edge
/// and triangles are emitted in cube order (x fastest), then table order.
/// Triangle normals point towards the positive side.
RawMcMesh marching_cubes_3p(const FieldGrid& grid, double iso = 0.0);

/// Removes invalid vertices, every triangle referencing one and vertices left
/// unreferenced; indices are compacted preserving order.
TriangleMesh strip_null(const RawMcMesh& raw);

/// Fan-fills boundary loops of at most max_hole_edges edges, then runs
/// smooth_iters uniform Laplacian steps (factor 0.5, boundary vertices fixed).
TriangleMesh cleanup(const TriangleMesh& mesh, int max_hole_edges, int smooth_iters);

}  // namespace tpsdf
