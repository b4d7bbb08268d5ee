// Three-pole signed distance field: exact evaluation against octree-local
// surface patches, dense lattices, the label mapping and training samples.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include "tpsdf/octree.hpp"

namespace tpsdf {

/// Either a signed distance or the direction-less null pole.
class ThreePoleValue {
 public:
  constexpr ThreePoleValue() = default;  // null
  static constexpr ThreePoleValue null() { return {}; }
  static constexpr ThreePoleValue signed_distance(double d) { return ThreePoleValue(d); }

  constexpr bool is_null() const { return null_; }
  constexpr bool is_signed() const { return !null_; }
  /// Distance with sign; 0 for null values.
  constexpr double value() const { return value_; }

  /// Quiet NaN for null, otherwise the distance rounded to float.
  float encode() const {
    return null_ ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(value_);
  }
  static ThreePoleValue decode(float v) {
    return std::isnan(v) ? null() : signed_distance(static_cast<double>(v));
  }

  constexpr bool operator==(const ThreePoleValue&) const = default;

 private:
  constexpr explicit ThreePoleValue(double d) : value_(d), null_(false) {}
  double value_ = 0.0;
  bool null_ = true;
};

enum class Label : std::uint8_t { inside = 0, outside = 1, null = 2 };

/// Signed(d < 0) -> inside, Signed(d >= 0) -> outside, Null -> null.
Label value_to_label(const ThreePoleValue& v);
/// inside -> -1, outside -> +1, null -> Null.
ThreePoleValue label_to_value(Label l);

/// Number of evaluations whose closest-point normal was orthogonal to the
/// query offset (sign decided by the ">= 0" convention). Diagnostic only.
std::uint64_t ambiguous_sign_count();

/// Evaluates the field at p (inside the closed root cube, else FieldError).
///
/// A point is null when no occupied leaf contains it. Otherwise the distance
/// and sign come from the closest point on the local patch: the triangles of
/// the occupied leaf containing p. Points on shared leaf faces use the union
/// of the patches of every occupied leaf whose closed box contains them, which
/// keeps lattice corners of occupied cells signed.
ThreePoleValue evaluate(const Vec3& p, const Octree& octree, const TriangleMesh& mesh);

/// Dense lattice of field values, x-fastest. Null is stored as quiet NaN.
struct FieldGrid {
  std::array<std::uint32_t, 3> dims{};
  Box3 bbox;
  std::vector<float> values;

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  Vec3 position(std::uint32_t i, std::uint32_t j, std::uint32_t k) const;
  ThreePoleValue at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    return ThreePoleValue::decode(values[index(i, j, k)]);
  }
  std::size_t null_count() const;
};

/// Empty (all-null) lattice with n_a points per axis spanning bbox.
FieldGrid make_lattice(const Box3& bbox, std::array<std::uint32_t, 3> dims);

/// Lattice of (2^depth + 1)^3 points over the octree root cube, each point
/// evaluated exactly. Output does not depend on `threads` (0 = all cores).
FieldGrid compute_grid(const Octree& octree, const TriangleMesh& mesh, int threads = 0);
/// Builds an octree of the given depth (4..10) and evaluates its lattice.
FieldGrid compute_grid(const TriangleMesh& mesh, int depth, double padding = 0.05,
                       int threads = 0);

/// One label byte per lattice point.
struct LabelGrid {
  std::array<std::uint32_t, 3> dims{};
  Box3 bbox;
  std::vector<std::uint8_t> labels;
};

LabelGrid to_labels(const FieldGrid& grid);
FieldGrid from_labels(const LabelGrid& labels);

enum class SamplingStrategy : std::uint8_t { random, uniform, octree };
SamplingStrategy parse_strategy(std::string_view name);
std::string_view to_string(SamplingStrategy s);

/// Training points with exact labels. `targets` holds the signed distance
/// (NaN for null points) used by the binary-classification + regression mode.
struct SampleBatch {
  std::vector<Vec3> points;
  std::vector<std::uint8_t> labels;
  std::vector<float> targets;
  SamplingStrategy strategy = SamplingStrategy::octree;

  std::size_t size() const { return points.size(); }
  std::array<std::size_t, 3> label_counts() const;
};

/// random: count_hint uniform points in the root cube. uniform: the
/// cell-centred n^3 lattice with n = round(cbrt(count_hint)). octree: the
/// deduplicated corners of every leaf cell (count_hint ignored).
SampleBatch sample_points(const TriangleMesh& mesh, const Octree& octree,
                          SamplingStrategy strategy, std::size_t count_hint,
                          std::uint64_t seed);

/// Labels and targets for arbitrary points in the root cube.
SampleBatch label_points(const TriangleMesh& mesh, const Octree& octree,
                         std::vector<Vec3> points, SamplingStrategy strategy);

}  // namespace tpsdf
