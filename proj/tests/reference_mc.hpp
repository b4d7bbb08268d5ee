// Textbook marching cubes used as an oracle: per-cube polygonisation with
// no vertex sharing, triangles in table order and table winding.
#pragma once

#include <array>
#include <vector>

#include "tpsdf/field.hpp"
#include "tpsdf/mc_tables.hpp"

namespace tpsdf::test {

using RefTriangle = std::array<Vec3, 3>;

inline Vec3 interpolate(double iso, const Vec3& p1, const Vec3& p2, double v1, double v2) {
  const double mu = (iso - v1) / (v2 - v1);
  return p1 + mu * (p2 - p1);
}

inline std::vector<RefTriangle> reference_marching_cubes(const FieldGrid& g, double iso) {
  std::vector<RefTriangle> out;
  for (std::uint32_t k = 0; k + 1 < g.dims[2]; ++k) {
    for (std::uint32_t j = 0; j + 1 < g.dims[1]; ++j) {
      for (std::uint32_t i = 0; i + 1 < g.dims[0]; ++i) {
        std::array<Vec3, 8> p;
        std::array<double, 8> v{};
        int cubeindex = 0;
        for (int c = 0; c < 8; ++c) {
          const auto& o = detail::kCornerOffsets[c];
          p[c] = g.position(i + o[0], j + o[1], k + o[2]);
          v[c] = g.values[g.index(i + o[0], j + o[1], k + o[2])];
          if (v[c] < iso) cubeindex |= 1 << c;
        }
        std::array<Vec3, 12> vertlist;
        for (int e = 0; e < 12; ++e) {
          if (detail::kEdgeTable[cubeindex] & (1 << e)) {
            const int a = detail::kEdgeCorners[e][0];
            const int b = detail::kEdgeCorners[e][1];
            vertlist[e] = interpolate(iso, p[a], p[b], v[a], v[b]);
          }
        }
        for (int t = 0; detail::kTriTable[cubeindex][t] != -1; t += 3) {
          out.push_back({vertlist[detail::kTriTable[cubeindex][t]],
                         vertlist[detail::kTriTable[cubeindex][t + 1]],
                         vertlist[detail::kTriTable[cubeindex][t + 2]]});
        }
      }
    }
  }
  return out;
}

}  // namespace tpsdf::test
