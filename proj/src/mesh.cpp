#include "tpsdf/mesh.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string_view>

namespace tpsdf {

namespace {

Vec3 raw_normal(const Vec3& a, const Vec3& b, const Vec3& c) { return cross(b - a, c - a); }

std::string_view next_token(std::string_view& line) {
  const auto start = line.find_first_not_of(" \t\r");
  if (start == std::string_view::npos) {
    line = {};
    return {};
  }
  line.remove_prefix(start);
  const auto end = line.find_first_of(" \t\r");
  const auto token = line.substr(0, end);
  line.remove_prefix(end == std::string_view::npos ? line.size() : end);
  return token;
}

template <typename T>
bool parse_number(std::string_view token, T& value) {
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace

double TriangleMesh::area(std::size_t tri) const {
  return 0.5 * norm(raw_normal(corner(tri, 0), corner(tri, 1), corner(tri, 2)));
}

Box3 TriangleMesh::bounds() const {
  Box3 box;
  for (const auto& t : triangles) {
    for (const auto v : t) box.expand(vertices[v]);
  }
  return box;
}

TriangleMesh make_mesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
                       bool drop_degenerate) {
  TriangleMesh mesh;
  mesh.vertices = std::move(vertices);
  for (const auto& t : triangles) {
    for (const auto v : t) {
      if (v >= mesh.vertices.size()) {
        throw MeshError("triangle references vertex " + std::to_string(v + 1) + " but only " +
                        std::to_string(mesh.vertices.size()) + " vertices exist");
      }
    }
  }

  Box3 box;
  for (const auto& t : triangles) {
    for (const auto v : t) box.expand(mesh.vertices[v]);
  }
  const double diag = box.empty() ? 0.0 : box.diagonal();
  const double min_area = 1e-12 * diag * diag;

  mesh.triangles.reserve(triangles.size());
  mesh.face_normals.reserve(triangles.size());
  for (const auto& t : triangles) {
    const Vec3 n = raw_normal(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    const double area = 0.5 * norm(n);
    if (drop_degenerate && (area <= min_area || !std::isfinite(area))) continue;
    mesh.triangles.push_back(t);
    mesh.face_normals.push_back(normalized(n));
  }
  return mesh;
}

void flip_orientation(TriangleMesh& mesh) {
  for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
  for (auto& n : mesh.face_normals) n = -n;
}

TriangleMesh parse_obj(std::istream& in, const std::string& source_name) {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::uint32_t> polygon;

  auto fail = [&](const std::string& what) -> MeshError {
    return MeshError(source_name + ":" + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    const auto tag = next_token(rest);
    if (tag == "v") {
      Vec3 p;
      for (std::size_t a = 0; a < 3; ++a) {
        const auto tok = next_token(rest);
        if (tok.empty() || !parse_number(tok, p[a])) throw fail("malformed vertex record");
      }
      vertices.push_back(p);
    } else if (tag == "f") {
      polygon.clear();
      for (auto tok = next_token(rest); !tok.empty(); tok = next_token(rest)) {
        // "i", "i/t", "i//n", "i/t/n": only the position index matters.
        const auto slash = tok.find('/');
        long long idx = 0;
        if (!parse_number(tok.substr(0, slash), idx) || idx == 0) {
          throw fail("malformed face index '" + std::string(tok) + "'");
        }
        const long long n = static_cast<long long>(vertices.size());
        const long long resolved = idx > 0 ? idx - 1 : n + idx;
        if (resolved < 0 || resolved >= n) {
          throw fail("face index " + std::to_string(idx) + " out of range");
        }
        polygon.push_back(static_cast<std::uint32_t>(resolved));
      }
      if (polygon.size() < 3) throw fail("face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < polygon.size(); ++k) {
        triangles.push_back({polygon[0], polygon[k], polygon[k + 1]});
      }
    }
  }
  if (in.bad()) throw MeshError(source_name + ": read error");

  TriangleMesh mesh = make_mesh(std::move(vertices), std::move(triangles), true);
  if (mesh.empty()) throw MeshError(source_name + ": no non-degenerate triangles");
  return mesh;
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open '" + path.string() + "'");
  return parse_obj(in, path.string());
}

void write_obj(std::ostream& out, const TriangleMesh& mesh) {
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write '" + path.string() + "'");
  write_obj(out, mesh);
  if (!out) throw MeshError("write failed for '" + path.string() + "'");
}

}  // namespace tpsdf
