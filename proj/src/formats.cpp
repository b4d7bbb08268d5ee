#include "tpsdf/formats.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace tpsdf {

namespace io {

namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw FormatError("unexpected end of file");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t get_u32(std::istream& in) { return get_le<std::uint32_t>(in); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
}

}  // namespace io

namespace {

void write_header(std::ostream& out, const char (&magic)[5], const std::array<std::uint32_t, 3>& dims,
                  const Box3& bbox) {
  out.write(magic, 4);
  for (const auto d : dims) io::put_u32(out, d);
  for (int a = 0; a < 3; ++a) io::put_f64(out, bbox.min[a]);
  for (int a = 0; a < 3; ++a) io::put_f64(out, bbox.max[a]);
}

void read_header(std::istream& in, const char (&magic)[5], std::array<std::uint32_t, 3>& dims,
                 Box3& bbox) {
  io::expect_magic(in, magic);
  std::uint64_t total = 1;
  for (auto& d : dims) {
    d = io::get_u32(in);
    if (d == 0) throw FormatError("grid header has a zero dimension");
    total *= d;
  }
  if (total > (1ULL << 34)) throw FormatError("grid header dimensions are implausibly large");
  for (int a = 0; a < 3; ++a) bbox.min[a] = io::get_f64(in);
  for (int a = 0; a < 3; ++a) bbox.max[a] = io::get_f64(in);
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(bbox.min[a]) || !std::isfinite(bbox.max[a]) || bbox.max[a] < bbox.min[a]) {
      throw FormatError("grid header has an invalid bounding box");
    }
  }
}

template <typename T, typename Fn>
T with_input(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  try {
    return fn(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

template <typename Fn>
void with_output(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  fn(out);
  out.flush();
  if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

}  // namespace

void write_field_grid(std::ostream& out, const FieldGrid& grid) {
  write_header(out, "3PF1", grid.dims, grid.bbox);
  for (const float v : grid.values) {
    io::put_f32(out, std::isnan(v) ? std::numeric_limits<float>::quiet_NaN() : v);
  }
}

void write_field_grid(const std::filesystem::path& path, const FieldGrid& grid) {
  with_output(path, [&](std::ostream& out) { write_field_grid(out, grid); });
}

FieldGrid read_field_grid(std::istream& in) {
  FieldGrid grid;
  read_header(in, "3PF1", grid.dims, grid.bbox);
  grid.values.resize(grid.size());
  for (auto& v : grid.values) v = io::get_f32(in);
  return grid;
}

FieldGrid read_field_grid(const std::filesystem::path& path) {
  return with_input<FieldGrid>(path, [](std::istream& in) { return read_field_grid(in); });
}

void write_label_grid(std::ostream& out, const LabelGrid& grid) {
  write_header(out, "3PL1", grid.dims, grid.bbox);
  out.write(reinterpret_cast<const char*>(grid.labels.data()),
            static_cast<std::streamsize>(grid.labels.size()));
}

void write_label_grid(const std::filesystem::path& path, const LabelGrid& grid) {
  with_output(path, [&](std::ostream& out) { write_label_grid(out, grid); });
}

LabelGrid read_label_grid(std::istream& in) {
  LabelGrid grid;
  read_header(in, "3PL1", grid.dims, grid.bbox);
  grid.labels.resize(static_cast<std::size_t>(grid.dims[0]) * grid.dims[1] * grid.dims[2]);
  if (!in.read(reinterpret_cast<char*>(grid.labels.data()),
               static_cast<std::streamsize>(grid.labels.size()))) {
    throw FormatError("unexpected end of file");
  }
  for (const auto l : grid.labels) {
    if (l > 2) throw FormatError("label outside {0,1,2}");
  }
  return grid;
}

LabelGrid read_label_grid(const std::filesystem::path& path) {
  return with_input<LabelGrid>(path, [](std::istream& in) { return read_label_grid(in); });
}

void write_samples(std::ostream& out, const SampleBatch& batch, bool with_targets) {
  out.write("3PS1", 4);
  io::put_u32(out, static_cast<std::uint32_t>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vec3& p = batch.points[i];
    io::put_f32(out, static_cast<float>(p.x));
    io::put_f32(out, static_cast<float>(p.y));
    io::put_f32(out, static_cast<float>(p.z));
    out.put(static_cast<char>(batch.labels[i]));
    if (with_targets) io::put_f32(out, batch.targets[i]);
  }
}

void write_samples(const std::filesystem::path& path, const SampleBatch& batch,
                   bool with_targets) {
  with_output(path, [&](std::ostream& out) { write_samples(out, batch, with_targets); });
}

SampleBatch read_samples(const std::filesystem::path& path) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw FormatError("cannot stat '" + path.string() + "'");
  return with_input<SampleBatch>(path, [&](std::istream& in) {
    io::expect_magic(in, "3PS1");
    const std::uint32_t count = io::get_u32(in);
    const std::uint64_t payload = bytes - 8;
    bool with_targets = false;
    if (payload == 17ULL * count) {
      with_targets = true;
    } else if (payload != 13ULL * count) {
      throw FormatError("sample file size does not match its point count");
    }
    SampleBatch batch;
    batch.points.resize(count);
    batch.labels.resize(count);
    batch.targets.assign(count, std::numeric_limits<float>::quiet_NaN());
    for (std::uint32_t i = 0; i < count; ++i) {
      batch.points[i].x = io::get_f32(in);
      batch.points[i].y = io::get_f32(in);
      batch.points[i].z = io::get_f32(in);
      const int label = in.get();
      if (label < 0 || label > 2) throw FormatError("sample label outside {0,1,2}");
      batch.labels[i] = static_cast<std::uint8_t>(label);
      if (with_targets) batch.targets[i] = io::get_f32(in);
    }
    return batch;
  });
}

}  // namespace tpsdf
