#include "tpsdf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

#include "tpsdf/geometry.hpp"

namespace tpsdf {

PointSample surface_sample(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw MetricError("surface sample size must be positive");
  if (mesh.empty()) throw MetricError("cannot sample an empty mesh");
  std::vector<double> cumulative(mesh.num_triangles());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    total += mesh.area(t);
    cumulative[t] = total;
  }
  if (!(total > 0.0)) throw MetricError("cannot sample a zero-area mesh");

  PointSample out;
  out.seed = seed;
  out.points.reserve(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto t = static_cast<std::size_t>(it - cumulative.begin());
    const double s = std::sqrt(unit(rng));
    const double r = unit(rng);
    out.points.push_back((1.0 - s) * mesh.corner(t, 0) + s * (1.0 - r) * mesh.corner(t, 1) +
                         s * r * mesh.corner(t, 2));
  }
  return out;
}

PointKdTree::PointKdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  std::vector<std::uint32_t> order(points_.size());
  std::iota(order.begin(), order.end(), 0U);
  nodes_.reserve(points_.size());
  build(order.data(), order.data() + order.size(), 0);
}

std::int32_t PointKdTree::build(std::uint32_t* begin, std::uint32_t* end, int depth) {
  if (begin == end) return -1;
  Box3 box;
  for (auto* it = begin; it != end; ++it) box.expand(points_[*it]);
  const Vec3 ext = box.extent();
  const int axis = (ext.x >= ext.y && ext.x >= ext.z) ? 0 : (ext.y >= ext.z ? 1 : 2);
  auto* mid = begin + (end - begin) / 2;
  std::nth_element(begin, mid, end, [&](std::uint32_t l, std::uint32_t r) {
    return points_[l][axis] < points_[r][axis];
  });
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({*mid, -1, -1, static_cast<std::uint8_t>(axis)});
  const auto left = build(begin, mid, depth + 1);
  const auto right = build(mid + 1, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double PointKdTree::nearest_squared(const Vec3& q) const {
  double best = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return best;
  std::vector<std::pair<std::int32_t, double>> stack;
  stack.reserve(64);
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    const auto [id, plane_d2] = stack.back();
    stack.pop_back();
    if (plane_d2 > best) continue;
    const Node& node = nodes_[id];
    const double d2 = squared_distance(q, points_[node.point]);
    if (d2 < best) best = d2;
    const double diff = q[node.axis] - points_[node.point][node.axis];
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    if (far >= 0) stack.emplace_back(far, diff * diff);
    if (near >= 0) stack.emplace_back(near, 0.0);
  }
  return best;
}

namespace {

double mean_nearest_squared(std::span<const Vec3> from, const PointKdTree& to) {
  double sum = 0.0;
  for (const auto& p : from) sum += to.nearest_squared(p);
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_l2(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw MetricError("chamfer distance of an empty point set");
  const PointKdTree ta(a);
  const PointKdTree tb(b);
  return 0.5 * (mean_nearest_squared(a, tb) + mean_nearest_squared(b, ta));
}

double fscore(std::span<const Vec3> a, std::span<const Vec3> b, double tau) {
  if (!(tau > 0.0)) throw MetricError("fscore threshold must be positive");
  if (a.empty() || b.empty()) return 0.0;
  const PointKdTree ta(a);
  const PointKdTree tb(b);
  const double tau2 = tau * tau;
  auto share_within = [&](std::span<const Vec3> from, const PointKdTree& to) {
    std::size_t hits = 0;
    for (const auto& p : from) hits += to.nearest_squared(p) <= tau2 ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(from.size());
  };
  const double precision = share_within(a, tb);
  const double recall = share_within(b, ta);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double default_fscore_tau(const TriangleMesh& ground_truth) {
  return 0.01 * ground_truth.bounds().diagonal();
}

double emd_exact(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) throw MetricError("EMD requires equally sized point sets");
  if (a.size() > kMaxEmdPoints) throw MetricError("EMD is limited to 2048 points per set");
  const std::size_t n = a.size();
  if (n == 0) return 0.0;

  // Shortest augmenting path Hungarian algorithm with potentials, 1-based.
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = distance(a[i], b[j]);
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<std::uint8_t> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost[(match[j] - 1) * n + (j - 1)];
  return total / static_cast<double>(n);
}

TopologyStats topology_stats(const TriangleMesh& mesh) {
  TopologyStats stats;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> edge_faces;
  std::vector<std::uint8_t> referenced(mesh.num_vertices(), 0);
  for (std::uint32_t f = 0; f < mesh.num_triangles(); ++f) {
    const auto& t = mesh.triangles[f];
    for (int k = 0; k < 3; ++k) {
      referenced[t[k]] = 1;
      edge_faces[edge_key(t[k], t[(k + 1) % 3])].push_back(f);
    }
  }

  std::vector<std::uint32_t> parent(mesh.num_triangles());
  std::iota(parent.begin(), parent.end(), 0U);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& [key, faces] : edge_faces) {
    if (faces.size() == 1) ++stats.boundary_edges;
    for (std::size_t i = 1; i < faces.size(); ++i) {
      const auto ra = find(faces[0]);
      const auto rb = find(faces[i]);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  for (std::uint32_t f = 0; f < mesh.num_triangles(); ++f) {
    if (find(f) == f) ++stats.components;
  }
  const auto vertices = static_cast<long long>(std::count(referenced.begin(), referenced.end(), 1));
  stats.euler = vertices - static_cast<long long>(edge_faces.size()) +
                static_cast<long long>(mesh.num_triangles());
  return stats;
}

}  // namespace tpsdf
