// Reconstruction quality measures.
//
// Chamfer-L2 convention: 0.5 * (mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2).
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "tpsdf/mesh.hpp"

namespace tpsdf {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PointSample {
  std::vector<Vec3> points;
  std::uint64_t seed = 0;
};

/// Area-weighted triangle choice, then a uniform barycentric point.
PointSample surface_sample(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

double chamfer_l2(std::span<const Vec3> a, std::span<const Vec3> b);
inline double chamfer_l2(const PointSample& a, const PointSample& b) {
  return chamfer_l2(a.points, b.points);
}

/// Harmonic mean of precision (share of a within tau of b) and recall.
double fscore(std::span<const Vec3> a, std::span<const Vec3> b, double tau);
inline double fscore(const PointSample& a, const PointSample& b, double tau) {
  return fscore(a.points, b.points, tau);
}

/// 1% of the bounding-box diagonal of the ground-truth mesh.
double default_fscore_tau(const TriangleMesh& ground_truth);

inline constexpr std::size_t kMaxEmdPoints = 2048;

/// Exact earth mover's distance: optimal perfect matching under Euclidean
/// cost divided by N. Requires |a| == |b| <= 2048.
double emd_exact(std::span<const Vec3> a, std::span<const Vec3> b);

struct TopologyStats {
  std::size_t boundary_edges = 0;
  long long euler = 0;
  std::size_t components = 0;
};

/// Boundary edges have one incident face; euler = V - E + F over referenced
/// vertices; components are connected through shared edges.
TopologyStats topology_stats(const TriangleMesh& mesh);

/// Static 3-d tree for exact nearest-neighbour queries.
class PointKdTree {
 public:
  explicit PointKdTree(std::span<const Vec3> points);
  /// Squared distance to the nearest stored point.
  double nearest_squared(const Vec3& q) const;

 private:
  struct Node {
    std::uint32_t point;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis = 0;
  };
  std::int32_t build(std::uint32_t* begin, std::uint32_t* end, int depth);

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
};

}  // namespace tpsdf
