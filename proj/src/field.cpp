#include "tpsdf/field.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <random>
#include <string>

#include "tpsdf/geometry.hpp"
#include "tpsdf/parallel.hpp"

namespace tpsdf {

namespace {

std::atomic<std::uint64_t> g_ambiguous_signs{0};

bool debug_enabled() {
  static const bool enabled = std::getenv("TPSDF_DEBUG") != nullptr;
  return enabled;
}

// Reusable scratch for repeated evaluations on one thread.
class PatchEvaluator {
 public:
  PatchEvaluator(const Octree& octree, const TriangleMesh& mesh)
      : octree_(octree), mesh_(mesh) {}

  ThreePoleValue operator()(const Vec3& p) {
    if (!octree_.root_box().contains(p)) {
      throw FieldError("evaluation point outside the octree root cube");
    }
    octree_.leaves_containing(p, leaves_);
    occupied_.clear();
    for (const auto id : leaves_) {
      if (octree_.node(id).occupied()) occupied_.push_back(id);
    }
    if (occupied_.empty()) return ThreePoleValue::null();

    std::span<const std::uint32_t> patch = octree_.triangles(octree_.node(occupied_.front()));
    if (occupied_.size() > 1) {
      merged_.clear();
      for (const auto id : occupied_) {
        const auto tris = octree_.triangles(octree_.node(id));
        merged_.insert(merged_.end(), tris.begin(), tris.end());
      }
      std::sort(merged_.begin(), merged_.end());
      merged_.erase(std::unique(merged_.begin(), merged_.end()), merged_.end());
      patch = merged_;
    }

    const ClosestPointResult cp = closest_point_linear(p, mesh_, patch);
    const double alignment = dot(cp.normal, p - cp.point);
    if (cp.distance > 0.0 && std::abs(alignment) <= 1e-12 * cp.distance) {
      g_ambiguous_signs.fetch_add(1, std::memory_order_relaxed);
      if (debug_enabled()) {
        std::cerr << "tpsdf: ambiguous sign at (" << p.x << ", " << p.y << ", " << p.z
                  << "), triangle " << cp.primitive << '\n';
      }
    }
    return ThreePoleValue::signed_distance(alignment >= 0.0 ? cp.distance : -cp.distance);
  }

 private:
  const Octree& octree_;
  const TriangleMesh& mesh_;
  std::vector<std::uint32_t> leaves_;
  std::vector<std::uint32_t> occupied_;
  std::vector<std::uint32_t> merged_;
};

}  // namespace

Label value_to_label(const ThreePoleValue& v) {
  if (v.is_null()) return Label::null;
  return v.value() < 0.0 ? Label::inside : Label::outside;
}

ThreePoleValue label_to_value(Label l) {
  switch (l) {
    case Label::inside:
      return ThreePoleValue::signed_distance(-1.0);
    case Label::outside:
      return ThreePoleValue::signed_distance(1.0);
    case Label::null:
      break;
  }
  return ThreePoleValue::null();
}

std::uint64_t ambiguous_sign_count() { return g_ambiguous_signs.load(); }

ThreePoleValue evaluate(const Vec3& p, const Octree& octree, const TriangleMesh& mesh) {
  PatchEvaluator eval(octree, mesh);
  return eval(p);
}

Vec3 FieldGrid::position(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
  const std::array<std::uint32_t, 3> idx = {i, j, k};
  Vec3 p;
  for (int a = 0; a < 3; ++a) {
    if (dims[a] > 1 && idx[a] == dims[a] - 1) {
      p[a] = bbox.max[a];
      continue;
    }
    const double span = bbox.max[a] - bbox.min[a];
    const double fraction =
        dims[a] > 1 ? static_cast<double>(idx[a]) / static_cast<double>(dims[a] - 1) : 0.0;
    p[a] = bbox.min[a] + fraction * span;
  }
  return p;
}

std::size_t FieldGrid::null_count() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](float v) { return std::isnan(v); }));
}

FieldGrid make_lattice(const Box3& bbox, std::array<std::uint32_t, 3> dims) {
  FieldGrid grid;
  grid.dims = dims;
  grid.bbox = bbox;
  grid.values.assign(grid.size(), std::numeric_limits<float>::quiet_NaN());
  return grid;
}

FieldGrid compute_grid(const Octree& octree, const TriangleMesh& mesh, int threads) {
  const std::uint32_t n = (1U << octree.max_depth()) + 1;
  FieldGrid grid = make_lattice(octree.root_box(), {n, n, n});
  parallel_for(n, threads, [&](std::size_t k0, std::size_t k1) {
    PatchEvaluator eval(octree, mesh);
    for (auto k = static_cast<std::uint32_t>(k0); k < k1; ++k) {
      for (std::uint32_t j = 0; j < n; ++j) {
        for (std::uint32_t i = 0; i < n; ++i) {
          grid.values[grid.index(i, j, k)] = eval(grid.position(i, j, k)).encode();
        }
      }
    }
  });
  return grid;
}

FieldGrid compute_grid(const TriangleMesh& mesh, int depth, double padding, int threads) {
  if (depth < 4 || depth > 10) {
    throw FieldError("grid depth must be in [4, 10], got " + std::to_string(depth));
  }
  const Octree octree = Octree::build(mesh, depth, padding);
  return compute_grid(octree, mesh, threads);
}

LabelGrid to_labels(const FieldGrid& grid) {
  LabelGrid out;
  out.dims = grid.dims;
  out.bbox = grid.bbox;
  out.labels.resize(grid.values.size());
  std::transform(grid.values.begin(), grid.values.end(), out.labels.begin(), [](float v) {
    return static_cast<std::uint8_t>(value_to_label(ThreePoleValue::decode(v)));
  });
  return out;
}

FieldGrid from_labels(const LabelGrid& labels) {
  FieldGrid grid = make_lattice(labels.bbox, labels.dims);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    grid.values[i] = label_to_value(static_cast<Label>(labels.labels[i])).encode();
  }
  return grid;
}

SamplingStrategy parse_strategy(std::string_view name) {
  if (name == "random") return SamplingStrategy::random;
  if (name == "uniform") return SamplingStrategy::uniform;
  if (name == "octree") return SamplingStrategy::octree;
  throw FieldError("unknown sampling strategy '" + std::string(name) + "'");
}

std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::random:
      return "random";
    case SamplingStrategy::uniform:
      return "uniform";
    case SamplingStrategy::octree:
      return "octree";
  }
  return "unknown";
}

std::array<std::size_t, 3> SampleBatch::label_counts() const {
  std::array<std::size_t, 3> counts{};
  for (const auto l : labels) ++counts[l];
  return counts;
}

SampleBatch label_points(const TriangleMesh& mesh, const Octree& octree,
                         std::vector<Vec3> points, SamplingStrategy strategy) {
  SampleBatch batch;
  batch.strategy = strategy;
  batch.points = std::move(points);
  batch.labels.resize(batch.points.size());
  batch.targets.resize(batch.points.size());
  PatchEvaluator eval(octree, mesh);
  for (std::size_t i = 0; i < batch.points.size(); ++i) {
    const ThreePoleValue v = eval(batch.points[i]);
    batch.labels[i] = static_cast<std::uint8_t>(value_to_label(v));
    batch.targets[i] = v.encode();
  }
  return batch;
}

SampleBatch sample_points(const TriangleMesh& mesh, const Octree& octree,
                          SamplingStrategy strategy, std::size_t count_hint,
                          std::uint64_t seed) {
  const Box3& root = octree.root_box();
  std::vector<Vec3> points;

  switch (strategy) {
    case SamplingStrategy::random: {
      if (count_hint == 0) throw FieldError("sample count must be positive");
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      points.reserve(count_hint);
      for (std::size_t i = 0; i < count_hint; ++i) {
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = root.min[a] + unit(rng) * (root.max[a] - root.min[a]);
        points.push_back(p);
      }
      break;
    }
    case SamplingStrategy::uniform: {
      if (count_hint == 0) throw FieldError("sample count must be positive");
      const auto n = static_cast<std::uint32_t>(
          std::max<long long>(1, std::llround(std::cbrt(static_cast<double>(count_hint)))));
      points.reserve(static_cast<std::size_t>(n) * n * n);
      for (std::uint32_t k = 0; k < n; ++k) {
        for (std::uint32_t j = 0; j < n; ++j) {
          for (std::uint32_t i = 0; i < n; ++i) {
            const std::array<std::uint32_t, 3> idx = {i, j, k};
            Vec3 p;
            for (int a = 0; a < 3; ++a) {
              p[a] = root.min[a] + (idx[a] + 0.5) / n * (root.max[a] - root.min[a]);
            }
            points.push_back(p);
          }
        }
      }
      break;
    }
    case SamplingStrategy::octree: {
      const int depth = octree.max_depth();
      std::vector<std::uint64_t> keys;
      for (const auto id : octree.leaves()) {
        const OctreeNode& leaf = octree.node(id);
        const int shift = depth - leaf.depth;
        for (int c = 0; c < 8; ++c) {
          std::uint64_t key = 0;
          for (int a = 2; a >= 0; --a) {
            const std::uint64_t v = (static_cast<std::uint64_t>(leaf.coord[a]) + ((c >> a) & 1))
                                    << shift;
            key = (key << 21) | v;
          }
          keys.push_back(key);
        }
      }
      // Keys order z, then y, then x: x-fastest lattice order.
      std::sort(keys.begin(), keys.end());
      keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
      points.reserve(keys.size());
      constexpr std::uint64_t mask = (1ULL << 21) - 1;
      for (const auto key : keys) {
        const std::uint64_t coords[3] = {key & mask, (key >> 21) & mask, (key >> 42) & mask};
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = octree.lattice_coordinate(a, coords[a], depth);
        points.push_back(p);
      }
      break;
    }
  }
  return label_points(mesh, octree, std::move(points), strategy);
}

}  // namespace tpsdf
