// Python bindings: meshes and grids cross the boundary as numpy arrays.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "tpsdf/extract.hpp"
#include "tpsdf/field.hpp"
#include "tpsdf/fixtures.hpp"
#include "tpsdf/formats.hpp"
#include "tpsdf/learn.hpp"
#include "tpsdf/metrics.hpp"

namespace py = pybind11;
using namespace tpsdf;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Faces = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;
using Values = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_points(const Points& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw py::value_error("expected an (N, 3) array");
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  const auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = {r(i, 0), r(i, 1), r(i, 2)};
  return out;
}

Points from_points(const std::vector<Vec3>& pts) {
  Points a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    w(i, 0) = pts[i].x;
    w(i, 1) = pts[i].y;
    w(i, 2) = pts[i].z;
  }
  return a;
}

TriangleMesh to_mesh(const Points& vertices, const Faces& faces) {
  if (faces.ndim() != 2 || faces.shape(1) != 3) throw py::value_error("expected an (M, 3) face array");
  std::vector<Triangle> tris(static_cast<std::size_t>(faces.shape(0)));
  const auto r = faces.unchecked<2>();
  for (py::ssize_t i = 0; i < faces.shape(0); ++i) {
    for (int k = 0; k < 3; ++k) {
      if (r(i, k) < 0) throw py::value_error("negative face index");
      tris[i][k] = static_cast<std::uint32_t>(r(i, k));
    }
  }
  return make_mesh(to_points(vertices), std::move(tris));
}

py::tuple from_mesh(const TriangleMesh& mesh) {
  Faces f({static_cast<py::ssize_t>(mesh.triangles.size()), py::ssize_t{3}});
  auto w = f.mutable_unchecked<2>();
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    for (int k = 0; k < 3; ++k) w(i, k) = mesh.triangles[i][k];
  }
  return py::make_tuple(from_points(mesh.vertices), f);
}

// Grids are (nz, ny, nx) float32 arrays with NaN for null plus a (min, max) box.
py::tuple from_grid(const FieldGrid& g) {
  Values v({static_cast<py::ssize_t>(g.dims[2]), static_cast<py::ssize_t>(g.dims[1]),
            static_cast<py::ssize_t>(g.dims[0])});
  std::memcpy(v.mutable_data(), g.values.data(), g.values.size() * sizeof(float));
  const auto box = py::make_tuple(py::make_tuple(g.bbox.min.x, g.bbox.min.y, g.bbox.min.z),
                                  py::make_tuple(g.bbox.max.x, g.bbox.max.y, g.bbox.max.z));
  return py::make_tuple(v, box);
}

FieldGrid to_grid(const Values& values, const std::array<std::array<double, 3>, 2>& box) {
  if (values.ndim() != 3) throw py::value_error("expected an (nz, ny, nx) array");
  FieldGrid g = make_lattice({{box[0][0], box[0][1], box[0][2]}, {box[1][0], box[1][1], box[1][2]}},
                             {static_cast<std::uint32_t>(values.shape(2)),
                              static_cast<std::uint32_t>(values.shape(1)),
                              static_cast<std::uint32_t>(values.shape(0))});
  std::memcpy(g.values.data(), values.data(), g.values.size() * sizeof(float));
  return g;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Three-pole signed distance fields";
  m.attr("__version__") = TPSDF_VERSION;

  py::register_exception<MeshError>(m, "MeshError", PyExc_ValueError);
  py::register_exception<FieldError>(m, "FieldError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<MetricError>(m, "MetricError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  m.def("fixture", [](const std::string& name) { return from_mesh(fixtures::by_name(name)); },
        py::arg("name"), "Built-in test mesh as (vertices, faces).");
  m.def("load_obj", [](const std::string& path) { return from_mesh(load_obj(path)); }, py::arg("path"));
  m.def("save_obj",
        [](const std::string& path, const Points& v, const Faces& f) { write_obj(path, to_mesh(v, f)); },
        py::arg("path"), py::arg("vertices"), py::arg("faces"));

  m.def("compute_field",
        [](const Points& v, const Faces& f, int depth, double padding, int threads) {
          const auto mesh = to_mesh(v, f);
          py::gil_scoped_release release;
          const auto grid = compute_grid(mesh, depth, padding, threads);
          py::gil_scoped_acquire acquire;
          return from_grid(grid);
        },
        py::arg("vertices"), py::arg("faces"), py::arg("depth") = 6, py::arg("padding") = 0.05,
        py::arg("threads") = 0, "Exact field on the octree lattice as (values, box).");

  m.def("reconstruct",
        [](const Values& values, const std::array<std::array<double, 3>, 2>& box, int fill, int smooth) {
          const auto grid = to_grid(values, box);
          auto mesh = strip_null(marching_cubes_3p(grid));
          if (fill > 0 || smooth > 0) mesh = cleanup(mesh, fill, smooth);
          return from_mesh(mesh);
        },
        py::arg("values"), py::arg("box"), py::arg("fill") = 0, py::arg("smooth") = 0,
        "Null-aware marching cubes as (vertices, faces).");

  m.def("labels",
        [](const Values& values, const std::array<std::array<double, 3>, 2>& box) {
          const auto labels = to_labels(to_grid(values, box));
          py::array_t<std::uint8_t> out({values.shape(0), values.shape(1), values.shape(2)});
          std::memcpy(out.mutable_data(), labels.labels.data(), labels.labels.size());
          return out;
        },
        py::arg("values"), py::arg("box"), "0 inside, 1 outside, 2 null.");

  m.def("topology",
        [](const Points& v, const Faces& f) {
          const auto t = topology_stats(to_mesh(v, f));
          py::dict d;
          d["boundary_edges"] = t.boundary_edges;
          d["euler"] = t.euler;
          d["components"] = t.components;
          return d;
        },
        py::arg("vertices"), py::arg("faces"));

  m.def("surface_sample",
        [](const Points& v, const Faces& f, std::size_t n, std::uint64_t seed) {
          return from_points(surface_sample(to_mesh(v, f), n, seed).points);
        },
        py::arg("vertices"), py::arg("faces"), py::arg("n"), py::arg("seed") = 0);
  m.def("chamfer_l2", [](const Points& a, const Points& b) { return chamfer_l2(to_points(a), to_points(b)); },
        py::arg("a"), py::arg("b"));
  m.def("fscore",
        [](const Points& a, const Points& b, double tau) { return fscore(to_points(a), to_points(b), tau); },
        py::arg("a"), py::arg("b"), py::arg("tau"));
  m.def("emd", [](const Points& a, const Points& b) { return emd_exact(to_points(a), to_points(b)); },
        py::arg("a"), py::arg("b"));

  m.def("fit",
        [](const Points& v, const Faces& f, int depth, const std::vector<int>& hidden, int epochs,
           double lr, std::size_t batch, const std::string& mode, std::uint64_t seed,
           const std::string& path) {
          const auto mesh = to_mesh(v, f);
          TrainConfig config;
          config.hidden = hidden;
          config.epochs = epochs;
          config.learning_rate = lr;
          config.batch_size = batch;
          config.mode = parse_mode(mode);
          config.seed = seed;
          py::gil_scoped_release release;
          const Octree tree = Octree::build(mesh, depth);
          const auto samples = sample_points(mesh, tree, SamplingStrategy::octree, 0, seed);
          const auto result = train(samples, config, tree.root_box());
          write_model(path, result.model);
          return result.loss_log;
        },
        py::arg("vertices"), py::arg("faces"), py::arg("depth"), py::arg("hidden"), py::arg("epochs"),
        py::arg("lr") = 1e-4, py::arg("batch") = 4096, py::arg("mode") = "triclass", py::arg("seed") = 0,
        py::arg("path"), "Trains on octree samples, writes a 3PM1 checkpoint, returns the loss log.");

  m.def("predict",
        [](const std::string& path, int depth) {
          const auto model = read_model(path);
          const auto n = static_cast<std::uint32_t>((1U << depth) + 1);
          return from_grid(predict_grid(model, make_lattice(model.domain(), {n, n, n})));
        },
        py::arg("path"), py::arg("depth"), "Predicted field of a checkpoint as (values, box).");
}
