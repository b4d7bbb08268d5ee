// Binary file formats. All multi-byte values are little-endian.
//
//   3PF1 field grid:  "3PF1" u32 nx ny nz, f64 min.xyz max.xyz, nx*ny*nz f32
//                     (x-fastest, quiet NaN = null)
//   3PL1 label grid:  same header, then one byte per lattice point in {0,1,2}
//   3PS1 samples:     "3PS1" u32 count, then per point f32 x y z, u8 label and,
//                     for files carrying regression targets, f32 signed distance
//                     (NaN for null points). Target presence follows from the
//                     file size.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>

#include "tpsdf/field.hpp"

namespace tpsdf {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

void put_u32(std::ostream& out, std::uint32_t v);
void put_f32(std::ostream& out, float v);
void put_f64(std::ostream& out, double v);
std::uint32_t get_u32(std::istream& in);
float get_f32(std::istream& in);
double get_f64(std::istream& in);
void expect_magic(std::istream& in, const char (&magic)[5]);

}  // namespace io

void write_field_grid(std::ostream& out, const FieldGrid& grid);
void write_field_grid(const std::filesystem::path& path, const FieldGrid& grid);
FieldGrid read_field_grid(std::istream& in);
FieldGrid read_field_grid(const std::filesystem::path& path);

void write_label_grid(std::ostream& out, const LabelGrid& grid);
void write_label_grid(const std::filesystem::path& path, const LabelGrid& grid);
LabelGrid read_label_grid(std::istream& in);
LabelGrid read_label_grid(const std::filesystem::path& path);

void write_samples(std::ostream& out, const SampleBatch& batch, bool with_targets);
void write_samples(const std::filesystem::path& path, const SampleBatch& batch,
                   bool with_targets);
SampleBatch read_samples(const std::filesystem::path& path);

}  // namespace tpsdf
