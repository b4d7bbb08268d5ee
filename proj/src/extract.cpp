#include "tpsdf/extract.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "tpsdf/geometry.hpp"
#include "tpsdf/mc_tables.hpp"

namespace tpsdf {

std::size_t RawMcMesh::invalid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{0}));
}

RawMcMesh marching_cubes_3p(const FieldGrid& grid, double iso) {
  using detail::kCornerOffsets;
  using detail::kEdgeCorners;
  using detail::kEdgeTable;
  using detail::kTriTable;

  RawMcMesh out;
  const auto [nx, ny, nz] = grid.dims;
  if (nx < 2 || ny < 2 || nz < 2) return out;

  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
  const float* values = grid.values.data();

  auto vertex_on_edge = [&](std::size_t a_idx, std::size_t b_idx, int axis,
                            const std::array<std::uint32_t, 3>& a_ijk) -> std::uint32_t {
    const std::uint64_t key = static_cast<std::uint64_t>(a_idx) * 3 + axis;
    const auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;

    std::array<std::uint32_t, 3> b_ijk = a_ijk;
    ++b_ijk[axis];
    const Vec3 pa = grid.position(a_ijk[0], a_ijk[1], a_ijk[2]);
    const Vec3 pb = grid.position(b_ijk[0], b_ijk[1], b_ijk[2]);
    const float fa = values[a_idx];
    const float fb = values[b_idx];
    const bool valid = !std::isnan(fa) && !std::isnan(fb);
    Vec3 p;
    if (!valid) {
      p = (pa + pb) * 0.5;
    } else {
      const double da = fa;
      const double db = fb;
      if (std::abs(db - da) < 1e-12) {
        p = (pa + pb) * 0.5;
      } else {
        p = pa + (iso - da) / (db - da) * (pb - pa);
      }
    }
    const auto id = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(p);
    out.valid.push_back(valid ? 1 : 0);
    edge_vertex.emplace(key, id);
    return id;
  };

  const std::size_t sx = 1;
  const std::size_t sy = nx;
  const std::size_t sz = static_cast<std::size_t>(nx) * ny;
  std::array<std::size_t, 8> corner_offset{};
  for (int c = 0; c < 8; ++c) {
    corner_offset[c] = kCornerOffsets[c][0] * sx + kCornerOffsets[c][1] * sy +
                       kCornerOffsets[c][2] * sz;
  }

  std::array<std::uint32_t, 12> edge_ids{};
  for (std::uint32_t k = 0; k + 1 < nz; ++k) {
    for (std::uint32_t j = 0; j + 1 < ny; ++j) {
      for (std::uint32_t i = 0; i + 1 < nx; ++i) {
        const std::size_t base = k * sz + j * sy + i;
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          const float v = values[base + corner_offset[c]];
          // NaN compares false: null corners are never inside.
          if (v < iso) cube |= 1 << c;
        }
        const int mask = kEdgeTable[cube];
        if (mask == 0) continue;

        for (int e = 0; e < 12; ++e) {
          if (!(mask & (1 << e))) continue;
          int c0 = kEdgeCorners[e][0];
          int c1 = kEdgeCorners[e][1];
          if (corner_offset[c0] > corner_offset[c1]) std::swap(c0, c1);
          int axis = 0;
          while (kCornerOffsets[c0][axis] == kCornerOffsets[c1][axis]) ++axis;
          const std::array<std::uint32_t, 3> a_ijk = {i + kCornerOffsets[c0][0],
                                                      j + kCornerOffsets[c0][1],
                                                      k + kCornerOffsets[c0][2]};
          edge_ids[e] = vertex_on_edge(base + corner_offset[c0], base + corner_offset[c1], axis,
                                       a_ijk);
        }
        for (int t = 0; kTriTable[cube][t] != -1; t += 3) {
          // The table winds towards the inside corners; flip to face outwards.
          out.triangles.push_back({edge_ids[kTriTable[cube][t]], edge_ids[kTriTable[cube][t + 2]],
                                   edge_ids[kTriTable[cube][t + 1]]});
        }
      }
    }
  }
  return out;
}

TriangleMesh strip_null(const RawMcMesh& raw) {
  constexpr auto unset = static_cast<std::uint32_t>(-1);
  std::vector<Triangle> kept;
  kept.reserve(raw.triangles.size());
  std::vector<std::uint8_t> used(raw.vertices.size(), 0);
  for (const auto& t : raw.triangles) {
    if (raw.valid[t[0]] && raw.valid[t[1]] && raw.valid[t[2]]) {
      kept.push_back(t);
      for (const auto v : t) used[v] = 1;
    }
  }
  std::vector<std::uint32_t> remap(raw.vertices.size(), unset);
  std::vector<Vec3> vertices;
  for (std::size_t v = 0; v < raw.vertices.size(); ++v) {
    if (used[v]) {
      remap[v] = static_cast<std::uint32_t>(vertices.size());
      vertices.push_back(raw.vertices[v]);
    }
  }
  for (auto& t : kept) {
    for (auto& v : t) v = remap[v];
  }
  return make_mesh(std::move(vertices), std::move(kept), false);
}

namespace {

// Directed boundary edges u -> v (edges used by exactly one triangle).
std::vector<std::pair<std::uint32_t, std::uint32_t>> boundary_half_edges(
    const TriangleMesh& mesh) {
  std::unordered_map<std::uint64_t, int> uses;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) ++uses[edge_key(t[k], t[(k + 1) % 3])];
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      if (uses[edge_key(t[k], t[(k + 1) % 3])] == 1) out.emplace_back(t[k], t[(k + 1) % 3]);
    }
  }
  return out;
}

void fill_holes(std::vector<Triangle>& triangles, const TriangleMesh& mesh, int max_hole_edges) {
  const auto half_edges = boundary_half_edges(mesh);
  std::multimap<std::uint32_t, std::size_t> outgoing;
  for (std::size_t i = 0; i < half_edges.size(); ++i) outgoing.emplace(half_edges[i].first, i);
  std::vector<std::uint8_t> visited(half_edges.size(), 0);

  for (std::size_t start = 0; start < half_edges.size(); ++start) {
    if (visited[start]) continue;
    std::vector<std::uint32_t> loop;
    std::size_t current = start;
    bool closed = false;
    while (true) {
      visited[current] = 1;
      loop.push_back(half_edges[current].first);
      const std::uint32_t next_vertex = half_edges[current].second;
      if (next_vertex == half_edges[start].first) {
        closed = true;
        break;
      }
      std::size_t next = half_edges.size();
      const auto [lo, hi] = outgoing.equal_range(next_vertex);
      for (auto it = lo; it != hi; ++it) {
        if (!visited[it->second]) {
          next = it->second;
          break;
        }
      }
      if (next == half_edges.size()) break;
      current = next;
    }
    const auto edges = static_cast<int>(loop.size());
    if (!closed || edges < 3 || edges > max_hole_edges) continue;
    for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
      triangles.push_back({loop[0], loop[i + 1], loop[i]});
    }
  }
}

}  // namespace

TriangleMesh cleanup(const TriangleMesh& mesh, int max_hole_edges, int smooth_iters) {
  if (max_hole_edges < 0 || smooth_iters < 0) {
    throw std::invalid_argument("cleanup parameters must be nonnegative");
  }
  if (max_hole_edges == 0 && smooth_iters == 0) return mesh;

  std::vector<Triangle> triangles = mesh.triangles;
  if (max_hole_edges > 0) fill_holes(triangles, mesh, max_hole_edges);
  TriangleMesh filled = make_mesh(mesh.vertices, std::move(triangles), false);
  if (smooth_iters == 0) return filled;

  std::vector<std::vector<std::uint32_t>> neighbours(filled.num_vertices());
  for (const auto& t : filled.triangles) {
    for (int k = 0; k < 3; ++k) {
      neighbours[t[k]].push_back(t[(k + 1) % 3]);
      neighbours[t[(k + 1) % 3]].push_back(t[k]);
    }
  }
  for (auto& n : neighbours) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  std::vector<std::uint8_t> fixed(filled.num_vertices(), 0);
  for (const auto& [u, v] : boundary_half_edges(filled)) fixed[u] = fixed[v] = 1;

  std::vector<Vec3> positions = filled.vertices;
  std::vector<Vec3> next(positions.size());
  for (int it = 0; it < smooth_iters; ++it) {
    for (std::size_t v = 0; v < positions.size(); ++v) {
      if (fixed[v] || neighbours[v].empty()) {
        next[v] = positions[v];
        continue;
      }
      Vec3 avg;
      for (const auto n : neighbours[v]) avg += positions[n];
      avg = avg / static_cast<double>(neighbours[v].size());
      next[v] = positions[v] + 0.5 * (avg - positions[v]);
    }
    positions.swap(next);
  }
  return make_mesh(std::move(positions), std::move(filled.triangles), false);
}

}  // namespace tpsdf
