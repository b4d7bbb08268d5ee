#include <doctest.h>

#include <cmath>
#include <random>

#include "tpsdf/extract.hpp"
#include "tpsdf/fixtures.hpp"
#include "tpsdf/mc_tables.hpp"
#include "tpsdf/metrics.hpp"
#include "reference_mc.hpp"

using namespace tpsdf;

namespace {

constexpr float kNull = std::numeric_limits<float>::quiet_NaN();

FieldGrid unit_grid(std::uint32_t n) {
  return make_lattice({{0, 0, 0}, {1, 1, 1}}, {n, n, n});
}

FieldGrid single_cube(const std::array<float, 8>& corner_values) {
  FieldGrid g = unit_grid(2);
  for (int c = 0; c < 8; ++c) {
    const auto& o = detail::kCornerOffsets[c];
    g.values[g.index(o[0], o[1], o[2])] = corner_values[c];
  }
  return g;
}

double signed_volume(const TriangleMesh& m) {
  double v = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    v += dot(m.corner(t, 0), cross(m.corner(t, 1), m.corner(t, 2))) / 6.0;
  }
  return v;
}

TriangleMesh tilted_patch() {
  auto base = fixtures::planar_patch(1.0, 8);
  for (auto& v : base.vertices) v = {v.x, v.y * std::cos(0.3), v.y * std::sin(0.3) + 0.1 * v.x};
  return make_mesh(base.vertices, base.triangles);
}

}  // namespace

TEST_CASE("all-null cube emits nothing") {
  const auto raw = marching_cubes_3p(single_cube({kNull, kNull, kNull, kNull, kNull, kNull, kNull, kNull}));
  CHECK(raw.triangles.empty());
  CHECK(raw.vertices.empty());
}

TEST_CASE("single negative corner matches textbook MC") {
  const auto g = single_cube({-0.25F, 0.5F, 0.75F, 1.0F, 0.25F, 0.5F, 0.6F, 0.7F});
  const auto raw = marching_cubes_3p(g);
  REQUIRE(raw.triangles.size() == 1);
  CHECK(raw.invalid_count() == 0);
  const auto ref = test::reference_marching_cubes(g, 0.0);
  REQUIRE(ref.size() == 1);
  const auto& t = raw.triangles[0];
  // Library output is the reference triangle with reversed winding.
  CHECK(distance(raw.vertices[t[0]], ref[0][0]) < 1e-12);
  CHECK(distance(raw.vertices[t[1]], ref[0][2]) < 1e-12);
  CHECK(distance(raw.vertices[t[2]], ref[0][1]) < 1e-12);
  // Hand-checked positions along the three edges out of corner 0.
  std::vector<Vec3> expected = {{0.25 / 0.75, 0, 0}, {0, 0.25 / 1.25, 0}, {0, 0, 0.5}};
  for (const auto v : t) {
    double best = 1.0;
    for (const auto& e : expected) best = std::min(best, distance(raw.vertices[v], e));
    CHECK(best < 1e-7);
  }
}

TEST_CASE("null corner next to a sign change yields an invalid vertex") {
  const auto g = single_cube({-0.5F, kNull, 0.5F, 0.5F, 0.5F, 0.5F, 0.5F, 0.5F});
  const auto raw = marching_cubes_3p(g);
  REQUIRE(raw.triangles.size() == 1);
  int invalid = 0;
  for (const auto v : raw.triangles[0]) invalid += raw.valid[v] ? 0 : 1;
  CHECK(invalid >= 1);
  CHECK(strip_null(raw).empty());
}

TEST_CASE("null corners are coded as positive") {
  // Corner 0 is the only inside corner, so the case matches the NaN-free one.
  const auto with_null = marching_cubes_3p(single_cube({-1.0F, kNull, 1.0F, kNull, 1.0F, 1.0F, 1.0F, 1.0F}));
  const auto without = marching_cubes_3p(single_cube({-1.0F, 1.0F, 1.0F, 1.0F, 1.0F, 1.0F, 1.0F, 1.0F}));
  CHECK(with_null.triangles.size() == without.triangles.size());
}

TEST_CASE("interpolation falls back to the midpoint on flat edges") {
  FieldGrid g = unit_grid(2);
  std::fill(g.values.begin(), g.values.end(), 1.0F);
  g.values[g.index(0, 0, 0)] = -1e-14F;
  g.values[g.index(1, 0, 0)] = -1e-14F;
  g.values[g.index(0, 1, 0)] = 0.0F;  // |f(b) - f(a)| < 1e-12 on the y edge
  const auto raw = marching_cubes_3p(g);
  bool found_midpoint = false;
  for (const auto& v : raw.vertices) {
    if (std::abs(v.x) < 1e-15 && std::abs(v.y - 0.5) < 1e-15 && std::abs(v.z) < 1e-15) found_midpoint = true;
    CHECK(std::isfinite(v.x));
  }
  CHECK(found_midpoint);
}

TEST_CASE("strip_null keeps a null-free mesh and compacts indices") {
  FieldGrid g = unit_grid(9);
  for (std::uint32_t k = 0; k < 9; ++k) {
    for (std::uint32_t j = 0; j < 9; ++j) {
      for (std::uint32_t i = 0; i < 9; ++i) {
        g.values[g.index(i, j, k)] = static_cast<float>(norm(g.position(i, j, k) - Vec3{0.5, 0.5, 0.5}) - 0.3);
      }
    }
  }
  const auto raw = marching_cubes_3p(g);
  REQUIRE(raw.invalid_count() == 0);
  const auto mesh = strip_null(raw);
  CHECK(mesh.num_triangles() == raw.triangles.size());
  CHECK(mesh.num_vertices() == raw.vertices.size());
  CHECK(mesh.triangles == raw.triangles);
}

TEST_CASE("strip_null drops everything when every triangle touches a null") {
  RawMcMesh raw;
  raw.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  raw.valid = {1, 1, 0, 1};
  raw.triangles = {{0, 1, 2}, {1, 3, 2}};
  const auto mesh = strip_null(raw);
  CHECK(mesh.empty());
  CHECK(mesh.num_vertices() == 0);
}

TEST_CASE("strip_null reindexes partially valid meshes") {
  RawMcMesh raw;
  raw.vertices = {{9, 9, 9}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  raw.valid = {0, 1, 1, 1};
  raw.triangles = {{0, 1, 2}, {1, 2, 3}};
  const auto mesh = strip_null(raw);
  REQUIRE(mesh.num_triangles() == 1);
  CHECK(mesh.triangles[0] == Triangle{0, 1, 2});
  CHECK(mesh.vertices[0].x == 0.0);
}

TEST_CASE("planar open patch stays open") {
  const auto patch = tilted_patch();
  const auto mesh = strip_null(marching_cubes_3p(compute_grid(patch, 5)));
  REQUIRE_FALSE(mesh.empty());
  CHECK(topology_stats(mesh).boundary_edges > 0);
}

TEST_CASE("classic MC equivalence on null-free grids") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::uint32_t nx = 2 + static_cast<std::uint32_t>(rng() % 12);
    const std::uint32_t ny = 2 + static_cast<std::uint32_t>(rng() % 12);
    const std::uint32_t nz = 2 + static_cast<std::uint32_t>(rng() % 12);
    FieldGrid g = make_lattice({{-1, -0.5, 0}, {1, 0.7, 2}}, {nx, ny, nz});
    for (auto& v : g.values) v = static_cast<float>(u(rng));
    const auto mesh = strip_null(marching_cubes_3p(g));
    const auto ref = test::reference_marching_cubes(g, 0.0);
    REQUIRE(mesh.num_triangles() == ref.size());
    for (std::size_t t = 0; t < ref.size(); ++t) {
      CHECK(distance(mesh.corner(t, 0), ref[t][0]) < 1e-9);
      CHECK(distance(mesh.corner(t, 1), ref[t][2]) < 1e-9);
      CHECK(distance(mesh.corner(t, 2), ref[t][1]) < 1e-9);
    }
  }
}

TEST_CASE("no surviving vertex touches a null lattice point") {
  const auto mesh_in = fixtures::disk();
  const FieldGrid g = compute_grid(mesh_in, 5);
  const auto mesh = strip_null(marching_cubes_3p(g));
  const Vec3 cell = g.bbox.extent() / static_cast<double>(g.dims[0] - 1);
  for (const auto& v : mesh.vertices) {
    std::array<double, 3> f{};
    int on_lattice = 0;
    for (int a = 0; a < 3; ++a) {
      f[a] = (v[a] - g.bbox.min[a]) / cell[a];
      on_lattice += std::abs(f[a] - std::round(f[a])) < 1e-6 ? 1 : 0;
    }
    REQUIRE(on_lattice >= 2);  // vertices lie on lattice edges
    // Both endpoints of the hosting edge carry signed values.
    std::array<std::uint32_t, 3> lo{};
    std::array<std::uint32_t, 3> hi{};
    for (int a = 0; a < 3; ++a) {
      const bool integral = std::abs(f[a] - std::round(f[a])) < 1e-6;
      lo[a] = static_cast<std::uint32_t>(integral ? std::round(f[a]) : std::floor(f[a]));
      hi[a] = static_cast<std::uint32_t>(integral ? std::round(f[a]) : std::ceil(f[a]));
    }
    CHECK_FALSE(std::isnan(g.values[g.index(lo[0], lo[1], lo[2])]));
    CHECK_FALSE(std::isnan(g.values[g.index(hi[0], hi[1], hi[2])]));
  }
}

TEST_CASE("sphere reconstruction is closed and faces outwards") {
  const auto mesh = strip_null(marching_cubes_3p(compute_grid(fixtures::icosphere(), 6)));
  const auto stats = topology_stats(mesh);
  CHECK(stats.boundary_edges == 0);
  CHECK(stats.euler == 2);
  CHECK(stats.components == 1);
  CHECK(signed_volume(mesh) > 0.0);
  CHECK(signed_volume(mesh) == doctest::Approx(4.0 / 3.0 * std::acos(-1.0) * 0.125).epsilon(0.02));
}

TEST_CASE("disk reconstruction is an open genus-0 disk") {
  const auto mesh = strip_null(marching_cubes_3p(compute_grid(fixtures::disk(), 6)));
  const auto stats = topology_stats(mesh);
  CHECK(stats.boundary_edges > 0);
  CHECK(stats.euler == 1);
  CHECK(stats.components == 1);
}

TEST_CASE("cleanup with zero parameters is the identity") {
  const auto mesh = fixtures::icosphere(0.5, 2);
  const auto out = cleanup(mesh, 0, 0);
  CHECK(out.triangles == mesh.triangles);
  CHECK(out.vertices.size() == mesh.vertices.size());
  CHECK_THROWS_AS(cleanup(mesh, -1, 0), std::invalid_argument);
}

TEST_CASE("cleanup closes a cube missing one face") {
  auto cube = fixtures::cube();
  std::vector<Triangle> tris(cube.triangles.begin() + 2, cube.triangles.end());
  const auto open = make_mesh(cube.vertices, tris);
  REQUIRE(topology_stats(open).boundary_edges == 4);
  const auto closed = cleanup(open, 4, 0);
  const auto stats = topology_stats(closed);
  CHECK(stats.boundary_edges == 0);
  CHECK(stats.euler == 2);
  CHECK(signed_volume(closed) == doctest::Approx(1.0));
}

TEST_CASE("cleanup leaves large boundaries alone") {
  // An open strip with a 200-edge boundary loop.
  std::vector<Vec3> v;
  std::vector<Triangle> t;
  for (int i = 0; i <= 99; ++i) {
    v.push_back({i * 0.01, 0, 0});
    v.push_back({i * 0.01, 0.01, 0});
  }
  for (std::uint32_t i = 0; i < 99; ++i) {
    t.push_back({2 * i, 2 * i + 2, 2 * i + 3});
    t.push_back({2 * i, 2 * i + 3, 2 * i + 1});
  }
  const auto strip = make_mesh(v, t);
  REQUIRE(topology_stats(strip).boundary_edges == 200);
  const auto out = cleanup(strip, 50, 0);
  CHECK(out.triangles == strip.triangles);
}

TEST_CASE("Laplacian smoothing moves interior vertices halfway to the average") {
  auto patch = fixtures::planar_patch(1.0, 4);
  const std::uint32_t centre = 2 * 5 + 2;
  patch.vertices[centre].z = 0.2;
  const auto out = cleanup(patch, 0, 1);
  // All neighbours are flat, so the average has z = 0.
  CHECK(out.vertices[centre].z == doctest::Approx(0.1));
  // Boundary vertices are fixed.
  CHECK(out.vertices[0].x == patch.vertices[0].x);
  CHECK(out.vertices[4].y == patch.vertices[4].y);
}
