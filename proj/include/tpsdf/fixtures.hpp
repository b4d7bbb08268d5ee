// Procedural test shapes with consistent orientation.
#pragma once

#include <string_view>

#include "tpsdf/mesh.hpp"

namespace tpsdf::fixtures {

/// Closed icosphere, outward normals.
TriangleMesh icosphere(double radius = 0.5, int subdivisions = 4);

/// Closed axis-aligned cube [-half, half]^3, 12 triangles, outward normals.
TriangleMesh cube(double half = 0.5);

/// Open disk of the given radius, tilted off the lattice planes.
TriangleMesh disk(double radius = 0.5, int rings = 16, int segments = 64);

/// Open-ended cylinder (no caps), outward normals, tilted.
TriangleMesh open_cylinder(double radius = 0.3, double height = 0.8, int rings = 16,
                           int segments = 64);

/// Two parallel square sheets with equal orientation separated by `gap`,
/// e.g. the front and back panel of a garment.
TriangleMesh layered_sheets(double side = 1.0, double gap = 0.04, int cells = 24);

/// Planar n x n grid of quads in z = 0 spanning [0, side]^2 (normal +z).
TriangleMesh planar_patch(double side = 1.0, int cells = 8);

/// One of: sphere, cube, disk, cylinder, sheets, patch. Throws MeshError.
TriangleMesh by_name(std::string_view name);

}  // namespace tpsdf::fixtures
