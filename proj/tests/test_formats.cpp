#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tpsdf/fixtures.hpp"
#include "tpsdf/formats.hpp"

using namespace tpsdf;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("tpsdf_test_" + name);
}

std::string bytes_of(const FieldGrid& g) {
  std::ostringstream out(std::ios::binary);
  write_field_grid(out, g);
  return out.str();
}

}  // namespace

TEST_CASE("3PF1 layout is little-endian with NaN nulls") {
  FieldGrid g = make_lattice({{-1, -2, -3}, {1, 2, 3}}, {2, 1, 1});
  g.values = {0.5F, std::numeric_limits<float>::quiet_NaN()};
  const std::string s = bytes_of(g);
  REQUIRE(s.size() == 4 + 12 + 48 + 8);
  CHECK(s.substr(0, 4) == "3PF1");
  CHECK(static_cast<unsigned char>(s[4]) == 2);
  CHECK(s[5] == 0);
  double min_x = 0;
  std::memcpy(&min_x, s.data() + 16, 8);
  CHECK(min_x == -1.0);
  float first = 0;
  std::memcpy(&first, s.data() + 64, 4);
  CHECK(first == 0.5F);
  float second = 0;
  std::memcpy(&second, s.data() + 68, 4);
  CHECK(std::isnan(second));
}

TEST_CASE("field grids round trip bit-exactly") {
  const FieldGrid g = compute_grid(fixtures::disk(), 4);
  const auto path = temp_file("grid.3pf1");
  write_field_grid(path, g);
  const FieldGrid back = read_field_grid(path);
  std::filesystem::remove(path);
  CHECK(back.dims == g.dims);
  CHECK(back.bbox.min.x == g.bbox.min.x);
  CHECK(back.bbox.max.z == g.bbox.max.z);
  CHECK(bytes_of(back) == bytes_of(g));
}

TEST_CASE("label grids round trip") {
  const LabelGrid labels = to_labels(compute_grid(fixtures::disk(), 4));
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  write_label_grid(buf, labels);
  CHECK(buf.str().size() == 64 + labels.labels.size());
  const LabelGrid back = read_label_grid(buf);
  CHECK(back.labels == labels.labels);
  CHECK(back.dims == labels.dims);
}

TEST_CASE("corrupt headers are rejected") {
  std::string good = bytes_of(make_lattice({{0, 0, 0}, {1, 1, 1}}, {2, 2, 2}));
  {
    std::istringstream in("3PX1" + good.substr(4));
    CHECK_THROWS_AS(read_field_grid(in), FormatError);
  }
  {
    std::string zero = good;
    zero[4] = 0;
    std::istringstream in(zero);
    CHECK_THROWS_AS(read_field_grid(in), FormatError);
  }
  {
    std::istringstream in(good.substr(0, good.size() - 3));
    CHECK_THROWS_AS(read_field_grid(in), FormatError);
  }
  {
    std::string bad_box = good;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::memcpy(bad_box.data() + 16, &nan, 8);
    std::istringstream in(bad_box);
    CHECK_THROWS_AS(read_field_grid(in), FormatError);
  }
  CHECK_THROWS_AS(read_field_grid(std::filesystem::path("/nonexistent.3pf1")), FormatError);
}

TEST_CASE("sample files with and without targets") {
  SampleBatch batch;
  batch.points = {{0.1, 0.2, 0.3}, {-1, 0, 1}};
  batch.labels = {0, 2};
  batch.targets = {-0.05F, std::numeric_limits<float>::quiet_NaN()};
  for (const bool with_targets : {false, true}) {
    const auto path = temp_file(with_targets ? "t.3ps1" : "n.3ps1");
    write_samples(path, batch, with_targets);
    CHECK(std::filesystem::file_size(path) == 8 + (with_targets ? 17 : 13) * 2);
    const SampleBatch back = read_samples(path);
    std::filesystem::remove(path);
    REQUIRE(back.size() == 2);
    CHECK(back.points[0].y == doctest::Approx(0.2));
    CHECK(back.labels == batch.labels);
    if (with_targets) {
      CHECK(back.targets[0] == -0.05F);
      CHECK(std::isnan(back.targets[1]));
    } else {
      CHECK(std::isnan(back.targets[0]));
    }
  }
}

TEST_CASE("truncated sample files are rejected") {
  const auto path = temp_file("bad.3ps1");
  {
    std::ofstream out(path, std::ios::binary);
    out.write("3PS1", 4);
    io::put_u32(out, 3);
    out.write("abcdefg", 7);
  }
  CHECK_THROWS_AS(read_samples(path), FormatError);
  std::filesystem::remove(path);
}
