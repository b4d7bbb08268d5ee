#include "tpsdf/fixtures.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace tpsdf::fixtures {

namespace {

// Fixed tilt keeping flat shapes off the octree's axis-aligned planes.
Vec3 tilt(const Vec3& p) {
  const double ax = 0.37;
  const double ay = 0.23;
  const Vec3 rx{p.x, std::cos(ax) * p.y - std::sin(ax) * p.z,
                std::sin(ax) * p.y + std::cos(ax) * p.z};
  return {std::cos(ay) * rx.x + std::sin(ay) * rx.z, rx.y,
          -std::sin(ay) * rx.x + std::cos(ay) * rx.z};
}

TriangleMesh tilted(std::vector<Vec3> vertices, std::vector<Triangle> triangles) {
  for (auto& v : vertices) v = tilt(v);
  return make_mesh(std::move(vertices), std::move(triangles), true);
}

}  // namespace

TriangleMesh icosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                         {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                         {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& p : v) p = normalized(p);
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      const auto id = static_cast<std::uint32_t>(v.size());
      v.push_back(normalized(v[a] + v[b]));
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const auto ab = midpoint(tri[0], tri[1]);
      const auto bc = midpoint(tri[1], tri[2]);
      const auto ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f.swap(next);
  }
  for (auto& p : v) p *= radius;
  for (auto& tri : f) {
    const Vec3 n = cross(v[tri[1]] - v[tri[0]], v[tri[2]] - v[tri[0]]);
    if (dot(n, v[tri[0]] + v[tri[1]] + v[tri[2]]) < 0.0) std::swap(tri[1], tri[2]);
  }
  return make_mesh(std::move(v), std::move(f), true);
}

TriangleMesh cube(double half) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.push_back({(i & 1) ? half : -half, (i & 2) ? half : -half, (i & 4) ? half : -half});
  }
  // Outward-wound quads split into two triangles each.
  const std::vector<std::array<std::uint32_t, 4>> quads = {
      {0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  std::vector<Triangle> f;
  for (const auto& q : quads) {
    f.push_back({q[0], q[1], q[2]});
    f.push_back({q[0], q[2], q[3]});
  }
  return make_mesh(std::move(v), std::move(f), true);
}

TriangleMesh disk(double radius, int rings, int segments) {
  std::vector<Vec3> v = {{0.0137, -0.0091, 0.0}};
  std::vector<Triangle> f;
  for (int r = 1; r <= rings; ++r) {
    const double rr = radius * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * std::numbers::pi * s / segments;
      v.push_back({rr * std::cos(a), rr * std::sin(a), 0.0});
    }
  }
  auto ring_vertex = [&](int r, int s) {
    return static_cast<std::uint32_t>(1 + (r - 1) * segments + (s % segments));
  };
  for (int s = 0; s < segments; ++s) f.push_back({0, ring_vertex(1, s), ring_vertex(1, s + 1)});
  for (int r = 1; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const auto a = ring_vertex(r, s);
      const auto b = ring_vertex(r + 1, s);
      const auto c = ring_vertex(r + 1, s + 1);
      const auto d = ring_vertex(r, s + 1);
      f.push_back({a, b, c});
      f.push_back({a, c, d});
    }
  }
  return tilted(std::move(v), std::move(f));
}

TriangleMesh open_cylinder(double radius, double height, int rings, int segments) {
  std::vector<Vec3> v;
  std::vector<Triangle> f;
  for (int r = 0; r <= rings; ++r) {
    const double z = -0.5 * height + height * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * std::numbers::pi * s / segments;
      v.push_back({radius * std::cos(a), radius * std::sin(a), z});
    }
  }
  auto id = [&](int r, int s) { return static_cast<std::uint32_t>(r * segments + s % segments); };
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      f.push_back({id(r, s), id(r, s + 1), id(r + 1, s + 1)});
      f.push_back({id(r, s), id(r + 1, s + 1), id(r + 1, s)});
    }
  }
  return tilted(std::move(v), std::move(f));
}

TriangleMesh planar_patch(double side, int cells) {
  std::vector<Vec3> v;
  std::vector<Triangle> f;
  const int n = cells + 1;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) v.push_back({side * i / cells, side * j / cells, 0.0});
  }
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      const auto a = static_cast<std::uint32_t>(j * n + i);
      f.push_back({a, a + 1, a + 1 + static_cast<std::uint32_t>(n)});
      f.push_back({a, a + 1 + static_cast<std::uint32_t>(n), a + static_cast<std::uint32_t>(n)});
    }
  }
  return make_mesh(std::move(v), std::move(f), true);
}

TriangleMesh layered_sheets(double side, double gap, int cells) {
  std::vector<Vec3> v;
  std::vector<Triangle> f;
  const int n = cells + 1;
  for (int layer = 0; layer < 2; ++layer) {
    const auto base = static_cast<std::uint32_t>(v.size());
    const double z = (layer == 0 ? -0.5 : 0.5) * gap;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        v.push_back({side * (static_cast<double>(i) / cells - 0.5),
                     side * (static_cast<double>(j) / cells - 0.5), z});
      }
    }
    for (int j = 0; j < cells; ++j) {
      for (int i = 0; i < cells; ++i) {
        const auto a = base + static_cast<std::uint32_t>(j * n + i);
        const auto nn = static_cast<std::uint32_t>(n);
        f.push_back({a, a + 1, a + 1 + nn});
        f.push_back({a, a + 1 + nn, a + nn});
      }
    }
  }
  return tilted(std::move(v), std::move(f));
}

TriangleMesh by_name(std::string_view name) {
  if (name == "sphere") return icosphere();
  if (name == "cube") return cube();
  if (name == "disk") return disk();
  if (name == "cylinder") return open_cylinder();
  if (name == "sheets") return layered_sheets();
  if (name == "patch") return planar_patch();
  throw MeshError("unknown fixture '" + std::string(name) + "'");
}

}  // namespace tpsdf::fixtures
