// tpsdf: field computation, reconstruction, fitting, sampling, evaluation and
// conversion benchmarks. Every command writes <out>.manifest.json.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tpsdf/extract.hpp"
#include "tpsdf/field.hpp"
#include "tpsdf/fixtures.hpp"
#include "tpsdf/formats.hpp"
#include "tpsdf/learn.hpp"
#include "tpsdf/metrics.hpp"
#include "tpsdf/parallel.hpp"

#ifndef TPSDF_VERSION
#define TPSDF_VERSION "unknown"
#endif

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for hashing");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects everything the manifest records while a command runs.
struct Run {
  std::string command;
  json flags = json::object();
  json inputs = json::object();
  json timings = json::object();
  json extra = json::object();
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;

  void input(const std::string& role, const std::string& path) {
    inputs[role] = {{"path", path}, {"fnv1a64", fnv1a_file(path)}};
  }

  template <typename Fn>
  auto timed(const std::string& stage, Fn&& fn) {
    const auto t0 = Clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings[stage] = seconds_since(t0);
    } else {
      auto result = fn();
      timings[stage] = seconds_since(t0);
      return result;
    }
  }

  void write_manifest() const {
    json m;
    m["command"] = command;
    m["flags"] = flags;
    m["seeds"] = {{"seed", seed}};
    m["threads"] = resolve_threads_flag();
    m["inputs"] = inputs;
    m["timings_s"] = timings;
    if (!extra.empty()) m["results"] = extra;
    m["version"] = TPSDF_VERSION;
    m["timestamp"] = utc_timestamp();
    std::ofstream f(out + ".manifest.json");
    if (!f) throw std::runtime_error("cannot write manifest next to '" + out + "'");
    f << m.dump(2) << '\n';
  }

  int resolve_threads_flag() const { return tpsdf::resolve_threads(threads); }
};

tpsdf::TriangleMesh load_mesh(Run& run, const std::string& path, bool flip) {
  run.input("mesh", path);
  auto mesh = run.timed("load_mesh", [&] { return tpsdf::load_obj(path); });
  if (flip) tpsdf::flip_orientation(mesh);
  return mesh;
}

tpsdf::FieldGrid lattice_for(const tpsdf::Box3& box, int depth) {
  const auto n = static_cast<std::uint32_t>((1U << depth) + 1);
  return tpsdf::make_lattice(box, {n, n, n});
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

void add_common(CLI::App* cmd, Run& run, bool with_out = true) {
  cmd->add_option("--seed", run.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", run.threads, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  if (with_out) cmd->add_option("--out", run.out, "Primary output path")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-pole signed distance fields: compute, learn and reconstruct"};
  app.set_version_flag("--version", TPSDF_VERSION);
  app.require_subcommand(1);

  Run run;
  std::string mesh_path;
  std::string grid_path;
  std::string model_path;
  std::string pred_path;
  std::string labels_path;
  std::string fixture_name;
  std::string strategy_name = "octree";
  std::string mode_name = "triclass";
  bool flip = false;
  int depth = 6;
  double padding = 0.05;
  double iso = 0.0;
  int fill = 0;
  int smooth = 0;
  std::size_t count = 0;
  bool with_targets = false;
  std::size_t eval_samples = 20000;
  double tau = 0.0;
  std::vector<int> depths;
  tpsdf::TrainConfig train;
  int log_every = 0;

  auto* compute = app.add_subcommand("compute-field", "Exact field on the octree lattice (3PF1)");
  compute->add_option("--mesh", mesh_path, "Input OBJ")->required()->check(CLI::ExistingFile);
  compute->add_option("--depth", depth, "Octree depth")->check(CLI::Range(4, 10))->capture_default_str();
  compute->add_option("--padding", padding, "Root cube padding fraction")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  compute->add_option("--labels", labels_path, "Also write the label grid (3PL1)");
  compute->add_flag("--flip", flip, "Flip all face windings");
  add_common(compute, run);

  auto* reconstruct = app.add_subcommand("reconstruct", "Null-aware marching cubes to OBJ");
  reconstruct->add_option("--grid", grid_path, "Input 3PF1 grid")->required()->check(CLI::ExistingFile);
  reconstruct->add_option("--fill", fill, "Fill holes up to this many edges")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  reconstruct->add_option("--smooth", smooth, "Laplacian smoothing iterations")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  reconstruct->add_option("--iso", iso, "Iso value")->capture_default_str();
  add_common(reconstruct, run);

  auto* fit = app.add_subcommand("fit", "Train a coordinate network on lattice samples (3PM1)");
  fit->add_option("--mesh", mesh_path, "Input OBJ")->required()->check(CLI::ExistingFile);
  fit->add_option("--depth", depth, "Octree depth for sampling")->check(CLI::Range(1, 10))->capture_default_str();
  fit->add_option("--mode", mode_name, "triclass or br")
      ->check(CLI::IsMember({"triclass", "br"}))
      ->capture_default_str();
  fit->add_option("--strategy", strategy_name, "Sampling strategy")
      ->check(CLI::IsMember({"octree", "uniform", "random"}))
      ->capture_default_str();
  fit->add_option("--count", count, "Point budget for uniform and random (0 = octree count)");
  fit->add_option("--epochs", train.epochs, "Training epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
  fit->add_option("--hidden", train.hidden, "Hidden widths, comma separated")->delimiter(',')->capture_default_str();
  fit->add_option("--lr", train.learning_rate, "Adam learning rate")->capture_default_str();
  fit->add_option("--batch", train.batch_size, "Mini-batch size")->capture_default_str();
  fit->add_option("--frequencies", train.frequencies, "Sinusoidal encoding frequencies")
      ->check(CLI::Range(0, 16))
      ->capture_default_str();
  fit->add_option("--weight-decay", train.weight_decay, "Adam weight decay")->capture_default_str();
  fit->add_flag("--class-weights", train.class_weights, "Inverse-frequency class weights");
  fit->add_option("--log-every", log_every, "Print the loss every N epochs (0 = never)");
  fit->add_option("--padding", padding, "Root cube padding fraction")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  fit->add_flag("--flip", flip, "Flip all face windings");
  add_common(fit, run);

  auto* predict = app.add_subcommand("predict", "Evaluate a trained model on a lattice (3PF1)");
  predict->add_option("--model", model_path, "Input 3PM1 model")->required()->check(CLI::ExistingFile);
  predict->add_option("--depth", depth, "Lattice depth")->check(CLI::Range(1, 10))->capture_default_str();
  add_common(predict, run);

  auto* sample = app.add_subcommand("sample", "Export labelled training points (3PS1)");
  sample->add_option("--mesh", mesh_path, "Input OBJ")->required()->check(CLI::ExistingFile);
  sample->add_option("--depth", depth, "Octree depth")->check(CLI::Range(1, 10))->capture_default_str();
  sample->add_option("--strategy", strategy_name, "Sampling strategy")
      ->check(CLI::IsMember({"octree", "uniform", "random"}))
      ->capture_default_str();
  sample->add_option("--count", count, "Point budget for uniform and random (0 = octree count)");
  sample->add_flag("--targets", with_targets, "Store signed distance targets");
  sample->add_option("--padding", padding, "Root cube padding fraction")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sample->add_flag("--flip", flip, "Flip all face windings");
  add_common(sample, run);

  auto* eval = app.add_subcommand("eval", "Chamfer, F-score and topology of a reconstruction");
  eval->add_option("--mesh", mesh_path, "Ground truth OBJ")->required()->check(CLI::ExistingFile);
  eval->add_option("--pred", pred_path, "Reconstructed OBJ")->required()->check(CLI::ExistingFile);
  eval->add_option("--samples", eval_samples, "Surface samples per mesh")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval->add_option("--tau", tau, "F-score threshold (0 = 1% of the ground truth diagonal)")
      ->check(CLI::NonNegativeNumber);
  add_common(eval, run);

  auto* bench = app.add_subcommand("bench", "Grid to mesh conversion time per depth");
  bench->add_option("--mesh", mesh_path, "Input OBJ")->required()->check(CLI::ExistingFile);
  bench->add_option("--depths", depths, "Depths, comma separated")
      ->required()
      ->delimiter(',')
      ->expected(1, -1)
      ->check(CLI::Range(6, 9));
  add_common(bench, run);

  auto* fixture = app.add_subcommand("fixture", "Write a built-in test mesh to OBJ");
  fixture->add_option("--name", fixture_name, "Fixture name")
      ->required()
      ->check(CLI::IsMember({"sphere", "cube", "disk", "cylinder", "sheets", "patch"}));
  add_common(fixture, run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto* cmd = app.get_subcommands().front();
    run.command = cmd->get_name();
    for (const auto* opt : cmd->get_options()) {
      if (opt->get_single_name() == "help") continue;
      const auto values = opt->results();
      const std::string name = opt->get_single_name();
      if (opt->get_type_size() == 0) {
        run.flags[name] = opt->count() > 0;
      } else if (!values.empty()) {
        run.flags[name] = values.size() == 1 ? json(values.front()) : json(values);
      } else {
        run.flags[name] = opt->get_default_str();
      }
    }
    const int threads = run.threads;

    if (cmd == compute) {
      const auto mesh = load_mesh(run, mesh_path, flip);
      const auto tree = run.timed("octree_build", [&] { return tpsdf::Octree::build(mesh, depth, padding); });
      const auto grid = run.timed("field_evaluation", [&] { return tpsdf::compute_grid(tree, mesh, threads); });
      run.timed("write", [&] {
        tpsdf::write_field_grid(run.out, grid);
        if (!labels_path.empty()) tpsdf::write_label_grid(labels_path, tpsdf::to_labels(grid));
      });
      run.extra = {{"dims", grid.dims}, {"octree_nodes", tree.nodes().size()}, {"null_points", grid.null_count()}};
    } else if (cmd == reconstruct) {
      run.input("grid", grid_path);
      const auto grid = run.timed("read", [&] { return tpsdf::read_field_grid(grid_path); });
      const auto raw = run.timed("marching_cubes", [&] { return tpsdf::marching_cubes_3p(grid, iso); });
      auto mesh = run.timed("strip", [&] { return tpsdf::strip_null(raw); });
      if (fill > 0 || smooth > 0) {
        mesh = run.timed("cleanup", [&] { return tpsdf::cleanup(mesh, fill, smooth); });
      }
      run.timed("write", [&] { tpsdf::write_obj(run.out, mesh); });
      if (mesh.triangles.empty()) std::cerr << "warning: reconstruction has no faces\n";
      const auto topo = tpsdf::topology_stats(mesh);
      run.extra = {{"vertices", mesh.num_vertices()},
                   {"faces", mesh.num_triangles()},
                   {"boundary_edges", topo.boundary_edges},
                   {"euler", topo.euler},
                   {"components", topo.components}};
    } else if (cmd == fit) {
      train.seed = run.seed;
      train.mode = tpsdf::parse_mode(mode_name);
      train.validate();
      const auto mesh = load_mesh(run, mesh_path, flip);
      const auto tree = run.timed("octree_build", [&] { return tpsdf::Octree::build(mesh, depth, padding); });
      const auto strategy = tpsdf::parse_strategy(strategy_name);
      const auto batch = run.timed("sampling", [&] {
        std::size_t budget = count;
        if (budget == 0 && strategy != tpsdf::SamplingStrategy::octree) {
          budget = tpsdf::sample_points(mesh, tree, tpsdf::SamplingStrategy::octree, 0, run.seed).size();
        }
        return tpsdf::sample_points(mesh, tree, strategy, budget, run.seed);
      });
      const auto result = run.timed("training", [&] {
        return tpsdf::train(batch, train, tree.root_box(), [&](int epoch, double loss) {
          if (log_every > 0 && (epoch + 1) % log_every == 0) {
            std::cerr << "epoch " << epoch + 1 << " loss " << loss << '\n';
          }
        });
      });
      run.timed("write", [&] { tpsdf::write_model(run.out, result.model); });
      const auto counts = batch.label_counts();
      run.extra = {{"samples", batch.size()},
                   {"label_counts", counts},
                   {"parameters", result.model.parameter_count()},
                   {"final_loss", result.loss_log.empty() ? json(nullptr) : json(result.loss_log.back())}};
      if (train.mode == tpsdf::TrainMode::triclass) {
        run.extra["train_accuracy"] = tpsdf::label_accuracy(result.model, batch.points, batch.labels);
      }
    } else if (cmd == predict) {
      run.input("model", model_path);
      const auto model = run.timed("read", [&] { return tpsdf::read_model(model_path); });
      const auto grid = run.timed("inference", [&] {
        return tpsdf::predict_grid(model, lattice_for(model.domain(), depth));
      });
      run.timed("write", [&] { tpsdf::write_field_grid(run.out, grid); });
      run.extra = {{"dims", grid.dims}, {"null_points", grid.null_count()}};
    } else if (cmd == sample) {
      const auto mesh = load_mesh(run, mesh_path, flip);
      const auto tree = run.timed("octree_build", [&] { return tpsdf::Octree::build(mesh, depth, padding); });
      const auto strategy = tpsdf::parse_strategy(strategy_name);
      const auto batch = run.timed("sampling", [&] {
        std::size_t budget = count;
        if (budget == 0 && strategy != tpsdf::SamplingStrategy::octree) {
          budget = tpsdf::sample_points(mesh, tree, tpsdf::SamplingStrategy::octree, 0, run.seed).size();
        }
        return tpsdf::sample_points(mesh, tree, strategy, budget, run.seed);
      });
      run.timed("write", [&] { tpsdf::write_samples(run.out, batch, with_targets); });
      run.extra = {{"samples", batch.size()}, {"label_counts", batch.label_counts()}};
    } else if (cmd == eval) {
      const auto gt = load_mesh(run, mesh_path, false);
      run.input("pred", pred_path);
      const auto pred = tpsdf::load_obj(pred_path);
      const double t = tau > 0.0 ? tau : tpsdf::default_fscore_tau(gt);
      const auto topo = tpsdf::topology_stats(pred);
      json result = {{"faces", pred.num_triangles()},
                     {"boundary_edges", topo.boundary_edges},
                     {"euler", topo.euler},
                     {"components", topo.components},
                     {"tau", t}};
      if (pred.triangles.empty()) {
        result["chamfer_l2"] = nullptr;
        result["fscore"] = nullptr;
      } else {
        run.timed("metrics", [&] {
          const auto a = tpsdf::surface_sample(gt, eval_samples, run.seed);
          const auto b = tpsdf::surface_sample(pred, eval_samples, run.seed + 1);
          result["chamfer_l2"] = tpsdf::chamfer_l2(a, b);
          result["fscore"] = tpsdf::fscore(a, b, t);
        });
      }
      std::ofstream(run.out) << result.dump() << '\n';
      std::cout << result.dump() << '\n';
      run.extra = result;
    } else if (cmd == bench) {
      const auto mesh = load_mesh(run, mesh_path, false);
      json rows = json::array();
      std::printf("%5s %9s %11s %11s %11s %11s %9s\n", "depth", "dims", "field_s", "mc_s", "strip_s",
                  "convert_s", "faces");
      for (const int d : depths) {
        const auto t0 = Clock::now();
        const auto grid = tpsdf::compute_grid(mesh, d, 0.05, threads);
        const double field_s = seconds_since(t0);
        std::vector<double> mc;
        std::vector<double> strip;
        std::vector<double> total;
        std::size_t faces = 0;
        for (int rep = 0; rep < 3; ++rep) {
          const auto t1 = Clock::now();
          const auto raw = tpsdf::marching_cubes_3p(grid);
          const double mc_s = seconds_since(t1);
          const auto t2 = Clock::now();
          faces = tpsdf::strip_null(raw).num_triangles();
          const double strip_s = seconds_since(t2);
          mc.push_back(mc_s);
          strip.push_back(strip_s);
          total.push_back(mc_s + strip_s);
        }
        const json row = {{"depth", d},     {"dims", grid.dims[0]},        {"field_s", field_s},
                          {"mc_s", median3(mc)}, {"strip_s", median3(strip)}, {"convert_s", median3(total)},
                          {"faces", faces}};
        std::printf("%5d %9u %11.4f %11.4f %11.4f %11.4f %9zu\n", d, grid.dims[0], field_s,
                    median3(mc), median3(strip), median3(total), faces);
        rows.push_back(row);
        run.timings["depth_" + std::to_string(d)] = median3(total);
      }
      std::ofstream(run.out) << json({{"rows", rows}}).dump(2) << '\n';
      run.extra = {{"rows", rows},
                   {"machine",
                    {{"hardware_threads", std::thread::hardware_concurrency()},
                     {"threads", tpsdf::resolve_threads(threads)},
#if defined(__clang__)
                     {"compiler", "clang " __clang_version__}
#elif defined(__GNUC__)
                     {"compiler", "gcc " __VERSION__}
#else
                     {"compiler", "unknown"}
#endif
                    }}};
    } else if (cmd == fixture) {
      const auto mesh = tpsdf::fixtures::by_name(fixture_name);
      run.timed("write", [&] { tpsdf::write_obj(run.out, mesh); });
      run.extra = {{"vertices", mesh.num_vertices()}, {"faces", mesh.num_triangles()}};
    }
    run.write_manifest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
