// Acceptance suite: one PASS/FAIL line per criterion with measured values.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "reference_mc.hpp"
#include "tpsdf/extract.hpp"
#include "tpsdf/field.hpp"
#include "tpsdf/fixtures.hpp"
#include "tpsdf/geometry.hpp"
#include "tpsdf/learn.hpp"
#include "tpsdf/metrics.hpp"

using namespace tpsdf;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& details, double seconds) {
  std::printf("[%s] %2d %-28s %s (%.2f s)\n", pass ? "PASS" : "FAIL", id, name, details.c_str(),
              seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

TriangleMesh reconstruct(const FieldGrid& grid) { return strip_null(marching_cubes_3p(grid)); }

double chamfer_to(const PointSample& truth, const TriangleMesh& mesh, std::size_t n) {
  if (mesh.triangles.empty()) return std::numeric_limits<double>::infinity();
  return chamfer_l2(truth, surface_sample(mesh, n, truth.seed + 1));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig c;
  c.hidden = {64, 64, 64};
  c.frequencies = 0;
  c.learning_rate = 1e-4;
  c.batch_size = 128;
  c.epochs = 500;
  c.seed = seed;
  return c;
}

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = squared_norm(ab);
  const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  return distance(p, a + t * ab);
}

void criterion_mc_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t triangles = 0;
  int mismatched_grids = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::array<std::uint32_t, 3> dims{};
    for (auto& d : dims) d = 2 + static_cast<std::uint32_t>(rng() % 32);
    FieldGrid g = make_lattice({{-1, -1, -1}, {1, 1, 1}}, dims);
    for (auto& v : g.values) v = static_cast<float>(u(rng));
    const auto mesh = reconstruct(g);
    const auto ref = test::reference_marching_cubes(g, 0.0);
    bool same = mesh.num_triangles() == ref.size();
    for (std::size_t t = 0; same && t < ref.size(); ++t) {
      // Same triangle, opposite winding convention.
      same = distance(mesh.corner(t, 0), ref[t][0]) < 1e-9 &&
             distance(mesh.corner(t, 1), ref[t][2]) < 1e-9 &&
             distance(mesh.corner(t, 2), ref[t][1]) < 1e-9;
    }
    triangles += ref.size();
    mismatched_grids += same ? 0 : 1;
  }
  const double s = since(t0);
  report(1, "classic-mc-equivalence", mismatched_grids == 0 && s < 10.0,
         fmt("20 grids, %zu triangles, %d mismatched grids", triangles, mismatched_grids), s);
}

struct SignAgreement {
  int agree = 0;
  int total = 0;
  int excluded = 0;
};

SignAgreement sign_agreement(const TriangleMesh& mesh, int depth, int wanted, std::uint64_t seed) {
  const Octree tree = Octree::build(mesh, depth);
  const ParityOracle oracle(mesh);
  const auto occupied = tree.occupied_leaves();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint32_t> hosts;
  std::vector<std::uint32_t> patch;
  SignAgreement r;
  while (r.total < wanted) {
    const auto& leaf = tree.node(occupied[rng() % occupied.size()]);
    const Vec3 e = leaf.box.extent();
    const Vec3 p = leaf.box.min + Vec3{u(rng) * e.x, u(rng) * e.y, u(rng) * e.z};

    // Truncation edges: edges used by exactly one triangle of the union patch.
    tree.leaves_containing(p, hosts);
    patch.clear();
    for (const auto h : hosts) {
      const auto tris = tree.triangles(tree.node(h));
      patch.insert(patch.end(), tris.begin(), tris.end());
    }
    std::sort(patch.begin(), patch.end());
    patch.erase(std::unique(patch.begin(), patch.end()), patch.end());
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> uses;
    for (const auto t : patch) {
      for (int k = 0; k < 3; ++k) {
        const auto a = mesh.triangles[t][k];
        const auto b = mesh.triangles[t][(k + 1) % 3];
        ++uses[{std::min(a, b), std::max(a, b)}];
      }
    }
    double band = std::numeric_limits<double>::infinity();
    for (const auto& [edge, n] : uses) {
      if (n == 1) band = std::min(band, segment_distance(p, mesh.vertices[edge.first], mesh.vertices[edge.second]));
    }
    if (band < e.x) {
      ++r.excluded;
      continue;
    }
    bool inside = false;
    try {
      inside = oracle.inside(p);
    } catch (const MeshError&) {
      ++r.excluded;
      continue;
    }
    const auto v = evaluate(p, tree, mesh);
    ++r.total;
    r.agree += v.is_signed() && (v.value() < 0.0) == inside ? 1 : 0;
  }
  return r;
}

void criterion_sign_agreement() {
  const auto t0 = Clock::now();
  const auto sphere = sign_agreement(fixtures::icosphere(), 7, 10000, 1);
  const auto cube = sign_agreement(fixtures::cube(), 7, 10000, 2);
  const double fs = 100.0 * sphere.agree / sphere.total;
  const double fc = 100.0 * cube.agree / cube.total;
  report(2, "watertight-sign-agreement", fs >= 99.0 && fc >= 99.0,
         fmt("sphere %.2f%% cube %.2f%% of 10000 points (excluded in band: %d, %d)", fs, fc,
             sphere.excluded, cube.excluded),
         since(t0));
}

void criterion_openness() {
  const auto t0 = Clock::now();
  const auto disk = topology_stats(reconstruct(compute_grid(fixtures::disk(), 7)));
  const auto cyl = topology_stats(reconstruct(compute_grid(fixtures::open_cylinder(), 7)));
  const auto sphere = topology_stats(reconstruct(compute_grid(fixtures::icosphere(), 7)));
  const bool pass = disk.boundary_edges > 0 && disk.components == 1 && cyl.boundary_edges > 0 &&
                    cyl.components == 1 && sphere.boundary_edges == 0 && sphere.euler == 2;
  report(3, "openness-preservation", pass,
         fmt("disk be=%zu comp=%zu; cylinder be=%zu comp=%zu; sphere be=%zu euler=%lld",
             disk.boundary_edges, disk.components, cyl.boundary_edges, cyl.components,
             sphere.boundary_edges, sphere.euler),
         since(t0));
}

void criterion_resolution() {
  const auto t0 = Clock::now();
  const auto mesh = fixtures::layered_sheets();
  const auto truth = surface_sample(mesh, 100000, 5);
  std::array<double, 3> cd{};
  for (int d = 6; d <= 8; ++d) cd[d - 6] = chamfer_to(truth, reconstruct(compute_grid(mesh, d)), 100000);
  const double s = since(t0);
  const bool pass = cd[0] >= 2.0 * cd[2] && cd[0] >= cd[1] && cd[1] >= cd[2] && s < 120.0;
  report(4, "resolution-monotonicity", pass,
         fmt("sheets CD d6=%.3e d7=%.3e d8=%.3e ratio6/8=%.2f", cd[0], cd[1], cd[2], cd[0] / cd[2]), s);
}

void criterion_sampling() {
  const auto t0 = Clock::now();
  const auto mesh = fixtures::disk();
  const Octree tree = Octree::build(mesh, 6);
  const FieldGrid exact = compute_grid(tree, mesh);
  const auto truth = surface_sample(mesh, 30000, 7);
  const std::size_t budget = sample_points(mesh, tree, SamplingStrategy::octree, 0, 0).size();
  std::map<SamplingStrategy, std::vector<double>> cds;
  std::map<SamplingStrategy, std::size_t> sizes;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto s : {SamplingStrategy::octree, SamplingStrategy::uniform, SamplingStrategy::random}) {
      // Random gets exactly as many points as the uniform lattice.
      const std::size_t hint = s == SamplingStrategy::random ? sizes[SamplingStrategy::uniform] : budget;
      const auto batch = sample_points(mesh, tree, s, hint, seed);
      sizes[s] = batch.size();
      const auto result = train(batch, small_config(seed), tree.root_box());
      cds[s].push_back(chamfer_to(truth, reconstruct(predict_grid(result.model, exact)), 30000));
    }
  }
  const double oct = median(cds[SamplingStrategy::octree]);
  const double uni = median(cds[SamplingStrategy::uniform]);
  const double rnd = median(cds[SamplingStrategy::random]);
  const double s = since(t0);
  std::string runs;
  for (const auto st : {SamplingStrategy::octree, SamplingStrategy::uniform, SamplingStrategy::random}) {
    runs += fmt(" %s[", std::string(to_string(st)).c_str());
    for (const double c : cds[st]) runs += fmt(" %.2e", c);
    runs += " ]";
  }
  report(5, "sampling-strategy-ordering", oct <= uni && uni <= rnd && s < 900.0,
         fmt("median CD octree=%.3e (n=%zu) uniform=%.3e (n=%zu) random=%.3e (n=%zu);", oct,
             sizes[SamplingStrategy::octree], uni, sizes[SamplingStrategy::uniform], rnd,
             sizes[SamplingStrategy::random]) +
             runs,
         s);
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(99);
  std::size_t parameters = 0;
  std::size_t bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto mode = i % 2 == 0 ? TrainMode::triclass : TrainMode::br;
    std::vector<int> hidden(1 + rng() % 3);
    for (auto& w : hidden) w = 2 + static_cast<int>(rng() % 7);
    const int frequencies = static_cast<int>(rng() % 3);
    const int batch = 3 + static_cast<int>(rng() % 6);
    const auto p = test::random_problem(mode, hidden, frequencies, batch, rng());
    const auto r = test::check_gradients(p);
    parameters += r.parameters;
    bad += r.failures;
    worst = std::max(worst, r.worst_relative);
  }
  const double s = since(t0);
  report(6, "gradient-correctness", bad == 0 && s < 60.0,
         fmt("20 configs, %zu parameters, %zu above 1e-4, worst relative %.2e", parameters, bad, worst), s);
}

struct FitOutcome {
  double accuracy = 0.0;
  double ratio = 0.0;
  double cd_pred = 0.0;
  double cd_exact = 0.0;
  bool blocks_monotone = true;
};

FitOutcome overfit(const TriangleMesh& mesh, std::uint64_t seed) {
  const Octree tree = Octree::build(mesh, 6);
  const FieldGrid exact = compute_grid(tree, mesh);
  const auto all = sample_points(mesh, tree, SamplingStrategy::octree, 0, seed);
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t held = all.size() / 10;
  SampleBatch train_set;
  std::vector<Vec3> test_points;
  std::vector<std::uint8_t> test_labels;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto k = order[i];
    if (i < held) {
      test_points.push_back(all.points[k]);
      test_labels.push_back(all.labels[k]);
    } else {
      train_set.points.push_back(all.points[k]);
      train_set.labels.push_back(all.labels[k]);
      train_set.targets.push_back(all.targets[k]);
    }
  }
  const auto result = train(train_set, small_config(seed), tree.root_box());
  FitOutcome f;
  f.accuracy = label_accuracy(result.model, test_points, test_labels);
  const auto truth = surface_sample(mesh, 30000, 11);
  f.cd_exact = chamfer_to(truth, reconstruct(exact), 30000);
  f.cd_pred = chamfer_to(truth, reconstruct(predict_grid(result.model, exact)), 30000);
  f.ratio = f.cd_pred / f.cd_exact;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b + 10 <= result.loss_log.size(); b += 10) {
    const double mean = std::accumulate(result.loss_log.begin() + b, result.loss_log.begin() + b + 10, 0.0) / 10.0;
    if (mean > previous) f.blocks_monotone = false;
    previous = mean;
  }
  return f;
}

void criterion_overfit() {
  const auto t0 = Clock::now();
  const auto disk = overfit(fixtures::disk(), 3);
  const auto sphere = overfit(fixtures::icosphere(), 3);
  const bool pass = disk.accuracy >= 0.95 && sphere.accuracy >= 0.95 && disk.ratio <= 3.0 && sphere.ratio <= 3.0;
  report(7, "overfit-fidelity", pass,
         fmt("held-out accuracy disk=%.4f sphere=%.4f; CD ratio disk=%.2f (%.2e/%.2e) sphere=%.2f "
             "(%.2e/%.2e); 10-epoch loss means non-increasing: disk %s sphere %s",
             disk.accuracy, sphere.accuracy, disk.ratio, disk.cd_pred, disk.cd_exact, sphere.ratio,
             sphere.cd_pred, sphere.cd_exact, disk.blocks_monotone ? "yes" : "no",
             sphere.blocks_monotone ? "yes" : "no"),
         since(t0));
}

void criterion_br_misalignment() {
  const auto t0 = Clock::now();
  // A closed surface, so any hole the misaligned mask opens shows up as boundary edges.
  const FieldGrid exact = compute_grid(fixtures::icosphere(), 6);
  const auto triclass = topology_stats(reconstruct(from_labels(to_labels(exact))));

  // Non-null mask eroded by one lattice step; distances stay exact.
  const auto& n = exact.dims;
  std::vector<float> probability(exact.size(), 0.0F);
  std::vector<float> dist(exact.size(), 0.0F);
  std::size_t eroded = 0;
  for (std::uint32_t k = 0; k < n[2]; ++k) {
    for (std::uint32_t j = 0; j < n[1]; ++j) {
      for (std::uint32_t i = 0; i < n[0]; ++i) {
        const auto idx = exact.index(i, j, k);
        const auto v = exact.at(i, j, k);
        if (v.is_null()) continue;
        dist[idx] = static_cast<float>(v.value());
        bool keep = true;
        const std::array<std::array<int, 3>, 6> steps = {
            {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
        for (const auto& s : steps) {
          const long a = static_cast<long>(i) + s[0];
          const long b = static_cast<long>(j) + s[1];
          const long c = static_cast<long>(k) + s[2];
          if (a < 0 || b < 0 || c < 0 || a >= n[0] || b >= n[1] || c >= n[2]) continue;
          if (exact.at(a, b, c).is_null()) keep = false;
        }
        probability[idx] = keep ? 1.0F : 0.0F;
        eroded += keep ? 0 : 1;
      }
    }
  }
  const auto br = topology_stats(reconstruct(merge_br_field(exact, probability, dist)));
  report(8, "br-misalignment", br.boundary_edges > triclass.boundary_edges,
         fmt("sphere boundary edges br=%zu (components %zu) triclass=%zu (components %zu); %zu "
             "lattice points eroded",
             br.boundary_edges, br.components, triclass.boundary_edges, triclass.components, eroded),
         since(t0));
}

void criterion_conversion_timing() {
  const auto t0 = Clock::now();
  const auto mesh = fixtures::icosphere();
  std::array<double, 3> t{};
  for (int d = 6; d <= 8; ++d) {
    const FieldGrid grid = compute_grid(mesh, d);
    std::vector<double> runs;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t1 = Clock::now();
      const auto m = reconstruct(grid);
      runs.push_back(since(t1));
    }
    t[d - 6] = median(runs);
  }
  const bool pass = t[2] < 10.0 && t[1] < 2.0 && t[0] < t[1] && t[1] < t[2];
  report(9, "conversion-timing", pass,
         fmt("sphere grid to mesh median of 3: d6=%.4f s d7=%.4f s d8=%.4f s", t[0], t[1], t[2]),
         since(t0));
}

void criterion_metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto points = [&](std::size_t n) {
    std::vector<Vec3> out(n);
    for (auto& p : out) p = {u(rng), u(rng), u(rng)};
    return out;
  };
  int chamfer_exact = 0;
  int emd_exact_count = 0;
  double worst_emd = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = points(500);
    const auto b = points(500);
    chamfer_exact += chamfer_l2(a, b) == test::brute_chamfer(a, b) ? 1 : 0;
    const auto x = points(8);
    const auto y = points(8);
    const double e = emd_exact(x, y);
    const double ref = test::brute_emd(x, y);
    const double rel = std::abs(e - ref) / ref;
    worst_emd = std::max(worst_emd, rel);
    emd_exact_count += rel <= 1e-12 ? 1 : 0;
  }
  report(10, "metric-oracles", chamfer_exact == 5 && emd_exact_count == 5,
         fmt("chamfer bit-identical %d/5 (500 points); emd matches 8! enumeration %d/5 (worst rel %.1e)",
             chamfer_exact, emd_exact_count, worst_emd),
         since(t0));
}

}  // namespace

int main() {
  criterion_mc_equivalence();
  criterion_sign_agreement();
  criterion_openness();
  criterion_resolution();
  criterion_sampling();
  criterion_gradients();
  criterion_overfit();
  criterion_br_misalignment();
  criterion_conversion_timing();
  criterion_metric_oracles();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
