#include "tpsdf/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace tpsdf {

TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                        const Vec3& c) {
  // Voronoi-region walk over vertices, edges and the face interior.
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  TrianglePoint r;
  auto finish = [&](const Vec3& q, Feature f, int local) {
    r.point = q;
    r.feature = f;
    r.local = local;
    r.squared_distance = squared_distance(p, q);
    return r;
  };

  const double d1 = dot(ab, ap);
  const double d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return finish(a, Feature::vertex, 0);

  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp);
  const double d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return finish(b, Feature::vertex, 1);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return finish(a + v * ab, Feature::edge, 0);
  }

  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp);
  const double d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return finish(c, Feature::vertex, 2);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return finish(a + w * ac, Feature::edge, 2);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(b + w * (c - b), Feature::edge, 1);
  }

  // Interior: project onto the plane, which is exact for points already on it.
  const Vec3 n = cross(ab, ac);
  return finish(p - (dot(ap, n) / squared_norm(n)) * n, Feature::face, 0);
}

bool triangle_cell_overlap(const Vec3& a, const Vec3& b, const Vec3& c, const Box3& box) {
  const Vec3 center = box.center();
  const Vec3 half = box.extent() * 0.5;
  const std::array<Vec3, 3> v = {a - center, b - center, c - center};
  const std::array<Vec3, 3> edges = {v[1] - v[0], v[2] - v[1], v[0] - v[2]};
  const std::array<Vec3, 3> units = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};

  auto separated = [&](const Vec3& axis) {
    const double p0 = dot(axis, v[0]);
    const double p1 = dot(axis, v[1]);
    const double p2 = dot(axis, v[2]);
    const double r =
        half.x * std::abs(axis.x) + half.y * std::abs(axis.y) + half.z * std::abs(axis.z);
    return std::min({p0, p1, p2}) > r || std::max({p0, p1, p2}) < -r;
  };

  for (const auto& u : units) {
    if (separated(u)) return false;
  }
  if (separated(cross(edges[0], edges[1]))) return false;
  for (const auto& u : units) {
    for (const auto& e : edges) {
      if (separated(cross(u, e))) return false;
    }
  }
  return true;
}

namespace {

double corner_angle(const TriangleMesh& mesh, std::uint32_t tri, std::uint32_t vertex) {
  const auto& t = mesh.triangles[tri];
  int k = 0;
  while (t[k] != vertex) ++k;
  const Vec3& p = mesh.vertices[t[k]];
  const Vec3 e1 = normalized(mesh.vertices[t[(k + 1) % 3]] - p);
  const Vec3 e2 = normalized(mesh.vertices[t[(k + 2) % 3]] - p);
  return std::acos(std::clamp(dot(e1, e2), -1.0, 1.0));
}

bool has_vertex(const Triangle& t, std::uint32_t v) { return t[0] == v || t[1] == v || t[2] == v; }

struct Candidate {
  TrianglePoint tp;
  std::uint32_t primitive = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return primitive != std::numeric_limits<std::uint32_t>::max(); }
  bool improves(double d2, std::uint32_t tri) const {
    return !valid() || d2 < tp.squared_distance ||
           (d2 == tp.squared_distance && tri < primitive);
  }
};

void consider(Candidate& best, const Vec3& q, const TriangleMesh& mesh, std::uint32_t tri) {
  const auto tp = closest_point_on_triangle(q, mesh.corner(tri, 0), mesh.corner(tri, 1),
                                            mesh.corner(tri, 2));
  if (best.improves(tp.squared_distance, tri)) {
    best.tp = tp;
    best.primitive = tri;
  }
}

ClosestPointResult to_result(const Candidate& best, const Vec3& normal) {
  ClosestPointResult r;
  r.point = best.tp.point;
  r.distance = std::sqrt(best.tp.squared_distance);
  r.normal = normal;
  r.primitive = best.primitive;
  r.feature = best.tp.feature;
  return r;
}

}  // namespace

Vec3 pseudo_normal(const TriangleMesh& mesh, std::span<const std::uint32_t> subset,
                   std::uint32_t primitive, Feature feature, int local) {
  const auto& t = mesh.triangles[primitive];
  if (feature == Feature::face) return mesh.face_normals[primitive];
  // Incident faces are summed in ascending index order whatever the subset order.
  std::vector<std::uint32_t> incident;
  const std::uint32_t u = t[local];
  const std::uint32_t v = t[(local + 1) % 3];
  for (const auto s : subset) {
    const auto& ts = mesh.triangles[s];
    if (has_vertex(ts, u) && (feature == Feature::vertex || has_vertex(ts, v))) {
      incident.push_back(s);
    }
  }
  std::sort(incident.begin(), incident.end());
  incident.erase(std::unique(incident.begin(), incident.end()), incident.end());
  Vec3 sum;
  for (const auto s : incident) {
    sum += feature == Feature::edge ? mesh.face_normals[s]
                                    : corner_angle(mesh, s, u) * mesh.face_normals[s];
  }
  const Vec3 n = normalized(sum);
  // Opposing faces can cancel exactly; fall back to the owning face.
  return squared_norm(n) > 0.0 ? n : mesh.face_normals[primitive];
}

ClosestPointResult closest_point_linear(const Vec3& query, const TriangleMesh& mesh,
                                        std::span<const std::uint32_t> subset) {
  Candidate best;
  for (const auto tri : subset) consider(best, query, mesh, tri);
  return to_result(best,
                   pseudo_normal(mesh, subset, best.primitive, best.tp.feature, best.tp.local));
}

SpatialIndex::SpatialIndex(const TriangleMesh& mesh)
    : SpatialIndex(mesh, [&] {
        std::vector<std::uint32_t> all(mesh.num_triangles());
        std::iota(all.begin(), all.end(), 0U);
        return all;
      }()) {}

SpatialIndex::SpatialIndex(const TriangleMesh& mesh, std::vector<std::uint32_t> subset,
                           std::uint32_t leaf_capacity)
    : mesh_(&mesh), leaf_capacity_(std::max<std::uint32_t>(1, leaf_capacity)),
      items_(std::move(subset)) {
  if (items_.empty()) throw MeshError("spatial index over an empty triangle subset");
  for (const auto tri : items_) {
    if (tri >= mesh.num_triangles()) throw MeshError("triangle subset index out of range");
  }

  // Ascending triangle order, matching pseudo_normal() bit for bit.
  std::vector<std::uint32_t> sorted = items_;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (const auto s : sorted) {
    const auto& t = mesh.triangles[s];
    const Vec3& n = mesh.face_normals[s];
    for (int k = 0; k < 3; ++k) {
      vertex_normals_[t[k]] += corner_angle(mesh, s, t[k]) * n;
      edge_normals_[edge_key(t[k], t[(k + 1) % 3])] += n;
    }
  }

  std::vector<Vec3> centroids(mesh.num_triangles());
  for (const auto s : items_) {
    centroids[s] = (mesh.corner(s, 0) + mesh.corner(s, 1) + mesh.corner(s, 2)) / 3.0;
  }
  nodes_.reserve(2 * items_.size() / leaf_capacity_ + 1);
  build(0, static_cast<std::uint32_t>(items_.size()), centroids);
}

std::uint32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end,
                                  const std::vector<Vec3>& centroids) {
  const auto self = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  Box3 bounds;
  Box3 centroid_bounds;
  for (auto i = begin; i < end; ++i) {
    for (int k = 0; k < 3; ++k) bounds.expand(mesh_->corner(items_[i], k));
    centroid_bounds.expand(centroids[items_[i]]);
  }
  nodes_[self].bounds = bounds;
  if (end - begin <= leaf_capacity_) {
    nodes_[self].first = begin;
    nodes_[self].count = end - begin;
    return self;
  }

  const Vec3 ext = centroid_bounds.extent();
  const int axis = (ext.x >= ext.y && ext.x >= ext.z) ? 0 : (ext.y >= ext.z ? 1 : 2);
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(items_.begin() + begin, items_.begin() + mid, items_.begin() + end,
                   [&](std::uint32_t l, std::uint32_t r) {
                     const double cl = centroids[l][axis];
                     const double cr = centroids[r][axis];
                     return cl < cr || (cl == cr && l < r);
                   });
  const auto left = build(begin, mid, centroids);
  const auto right = build(mid, end, centroids);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

ClosestPointResult SpatialIndex::closest_point(const Vec3& query) const {
  Candidate best;
  std::vector<std::pair<double, std::uint32_t>> stack;
  stack.reserve(64);
  stack.emplace_back(nodes_[0].bounds.squared_distance(query), 0U);
  while (!stack.empty()) {
    const auto [box_d2, id] = stack.back();
    stack.pop_back();
    // Equal distances are still visited so index ties resolve deterministically.
    if (best.valid() && box_d2 > best.tp.squared_distance) continue;
    const Node& node = nodes_[id];
    if (node.leaf()) {
      for (auto i = node.first; i < node.first + node.count; ++i) {
        consider(best, query, *mesh_, items_[i]);
      }
      continue;
    }
    const double dl = nodes_[node.left].bounds.squared_distance(query);
    const double dr = nodes_[node.right].bounds.squared_distance(query);
    if (dl <= dr) {
      stack.emplace_back(dr, node.right);
      stack.emplace_back(dl, node.left);
    } else {
      stack.emplace_back(dl, node.left);
      stack.emplace_back(dr, node.right);
    }
  }

  const auto& t = mesh_->triangles[best.primitive];
  Vec3 n = mesh_->face_normals[best.primitive];
  if (best.tp.feature == Feature::edge) {
    const int k = best.tp.local;
    n = normalized(edge_normals_.at(edge_key(t[k], t[(k + 1) % 3])));
  } else if (best.tp.feature == Feature::vertex) {
    n = normalized(vertex_normals_.at(t[best.tp.local]));
  }
  if (squared_norm(n) == 0.0) n = mesh_->face_normals[best.primitive];
  return to_result(best, n);
}

ParityOracle::ParityOracle(const TriangleMesh& mesh)
    : mesh_(&mesh), index_(std::make_unique<SpatialIndex>(mesh)) {
  std::unordered_map<std::uint64_t, int> uses;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) ++uses[edge_key(t[k], t[(k + 1) % 3])];
  }
  for (const auto& [key, count] : uses) {
    if (count != 2) throw MeshError("parity test requires a watertight mesh");
  }
}

bool ParityOracle::inside(const Vec3& p) const {
  if (index_->closest_point(p).distance <= 1e-9) {
    throw MeshError("parity test point lies on the surface");
  }
  static const std::array<Vec3, 6> directions = {
      normalized(Vec3{0.5773, 0.5821, 0.5727}),  normalized(Vec3{-0.3121, 0.8117, 0.4932}),
      normalized(Vec3{0.7071, -0.2236, -0.6708}), normalized(Vec3{-0.1313, -0.4472, 0.8847}),
      normalized(Vec3{0.9129, 0.3651, -0.1826}),  normalized(Vec3{-0.6325, -0.6325, -0.4472})};
  constexpr double eps = 1e-10;

  for (const auto& dir : directions) {
    int crossings = 0;
    bool ambiguous = false;
    for (std::size_t tri = 0; tri < mesh_->num_triangles() && !ambiguous; ++tri) {
      // Moller-Trumbore.
      const Vec3& a = mesh_->corner(tri, 0);
      const Vec3 e1 = mesh_->corner(tri, 1) - a;
      const Vec3 e2 = mesh_->corner(tri, 2) - a;
      const Vec3 h = cross(dir, e2);
      const double det = dot(e1, h);
      const double scale = norm(e1) * norm(e2);
      if (std::abs(det) <= eps * scale) {
        // Ray parallel to the plane; grazing contact would make parity unreliable.
        const Vec3 n = cross(e1, e2);
        if (std::abs(dot(p - a, n)) <= eps * scale) ambiguous = true;
        continue;
      }
      const double inv = 1.0 / det;
      const Vec3 s = p - a;
      const double u = dot(s, h) * inv;
      const Vec3 q = cross(s, e1);
      const double v = dot(dir, q) * inv;
      const double t = dot(e2, q) * inv;
      if (u < -eps || v < -eps || u + v > 1.0 + eps || t < -eps) continue;
      if (u < eps || v < eps || u + v > 1.0 - eps || t < eps) {
        ambiguous = true;
        continue;
      }
      ++crossings;
    }
    if (!ambiguous) return (crossings % 2) == 1;
  }
  throw MeshError("parity test could not find a non-degenerate ray");
}

bool inside_by_parity(const TriangleMesh& mesh, const Vec3& p) {
  return ParityOracle(mesh).inside(p);
}

}  // namespace tpsdf
