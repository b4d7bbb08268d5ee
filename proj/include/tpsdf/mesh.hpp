// Indexed triangle meshes and Wavefront OBJ input/output.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpsdf/vec3.hpp"

namespace tpsdf {

using Triangle = std::array<std::uint32_t, 3>;

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Triangles with per-face unit normals following the right-hand rule of the
/// vertex order. Normals of the input surface decide the sign of the field, so
/// meshes are expected to be consistently oriented.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec3> face_normals;

  bool empty() const { return triangles.empty(); }
  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  const Vec3& corner(std::size_t tri, int k) const { return vertices[triangles[tri][k]]; }
  double area(std::size_t tri) const;
  Box3 bounds() const;
};

/// Builds a mesh, computing face normals. With drop_degenerate, triangles with
/// area <= 1e-12 * bbox_diagonal^2 are removed. Throws MeshError on an
/// out-of-range index.
TriangleMesh make_mesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
                       bool drop_degenerate = true);

/// Reverses the winding (and normal) of every triangle.
void flip_orientation(TriangleMesh& mesh);

/// Parses "v" and "f" records; polygons are fan-triangulated, every other
/// record is ignored. Degenerate faces are dropped. Throws MeshError with the
/// line number on malformed faces and when no usable triangle remains.
TriangleMesh parse_obj(std::istream& in, const std::string& source_name = "<stream>");
TriangleMesh load_obj(const std::filesystem::path& path);

void write_obj(std::ostream& out, const TriangleMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace tpsdf
