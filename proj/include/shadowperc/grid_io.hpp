// Copyright 2026 The shadowperc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SHADOWPERC_GRID_IO_HPP_
#define SHADOWPERC_GRID_IO_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "shadowperc/common.hpp"
#include "shadowperc/sampler.hpp"

namespace shadowperc {

// Flat little-endian grid file. Layout of one record:
//   char[8] "SPGRID\0\0", u32 version, u32 kind,
//   f64 origin_x, f64 origin_y, f64 h, u64 nx, u64 ny,
//   f64 truncation, u64 seed, u64 stream, f64 horizon,
//   u32 variant, u32 tag,
//   nx * ny f64 values, row-major (x fastest).
// A file may hold several records back to back.
inline constexpr std::uint32_t kGridFormatVersion = 1;

enum class GridKind : std::uint32_t {
  Noise = 0,
  Field = 1,
  Gradient = 2,
  Shadow = 3,
  Argmax = 4,
  GoodMap = 5,
  Mask = 6,
};

struct GridHeader {
  GridKind kind = GridKind::Field;
  GridGeometry geometry;
  double truncation = kInf;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double horizon = kNaN;
  std::uint32_t variant = 0;  // 0 none, 1 continuous shadow, 2 discrete shadow
  std::uint32_t tag = 0;      // free slot, e.g. level of a good map
  friend bool operator==(const GridHeader& a, const GridHeader& b);
};

struct GridRecord {
  GridHeader header;
  std::vector<double> values;
};

void write_grid(std::ostream& out, const GridRecord& rec);
// Throws on a bad magic number, version or truncated data.
GridRecord read_grid(std::istream& in);

void write_grid_file(const std::string& path, const std::vector<GridRecord>& recs);
std::vector<GridRecord> read_grid_file(const std::string& path);

// CSV with header "x,y,value"; NaN values are written as empty cells.
void write_grid_csv(std::ostream& out, const GridRecord& rec);

GridRecord to_record(const FieldGrid& f);
FieldGrid field_from_record(const GridRecord& rec);

}  // namespace shadowperc

#endif  // SHADOWPERC_GRID_IO_HPP_
