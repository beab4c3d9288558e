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

#include "shadowperc/grid_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace shadowperc {
namespace {

constexpr char kMagic[8] = {'S', 'P', 'G', 'R', 'I', 'D', '\0', '\0'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_bytes(std::istream& in, int n) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), n)) throw Error("grid file is truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& in) { return static_cast<std::uint32_t>(get_bytes(in, 4)); }
std::uint64_t get_u64(std::istream& in) { return get_bytes(in, 8); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

bool same_double(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace

bool operator==(const GridHeader& a, const GridHeader& b) {
  return a.kind == b.kind && a.geometry.nx == b.geometry.nx &&
         a.geometry.ny == b.geometry.ny &&
         same_double(a.geometry.origin.x, b.geometry.origin.x) &&
         same_double(a.geometry.origin.y, b.geometry.origin.y) &&
         same_double(a.geometry.h, b.geometry.h) &&
         same_double(a.truncation, b.truncation) && a.seed == b.seed &&
         a.stream == b.stream && same_double(a.horizon, b.horizon) &&
         a.variant == b.variant && a.tag == b.tag;
}

void write_grid(std::ostream& out, const GridRecord& rec) {
  const GridHeader& h = rec.header;
  if (rec.values.size() != h.geometry.size()) {
    throw Error("grid values do not match the header dimensions");
  }
  out.write(kMagic, 8);
  put_u32(out, kGridFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(h.kind));
  put_f64(out, h.geometry.origin.x);
  put_f64(out, h.geometry.origin.y);
  put_f64(out, h.geometry.h);
  put_u64(out, h.geometry.nx);
  put_u64(out, h.geometry.ny);
  put_f64(out, h.truncation);
  put_u64(out, h.seed);
  put_u64(out, h.stream);
  put_f64(out, h.horizon);
  put_u32(out, h.variant);
  put_u32(out, h.tag);
  for (double v : rec.values) put_f64(out, v);
  if (!out) throw IoError("failed to write grid data");
}

GridRecord read_grid(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error("not a grid file (bad magic)");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kGridFormatVersion) {
    throw Error("unsupported grid format version " + std::to_string(version));
  }
  GridRecord rec;
  GridHeader& h = rec.header;
  h.kind = static_cast<GridKind>(get_u32(in));
  h.geometry.origin.x = get_f64(in);
  h.geometry.origin.y = get_f64(in);
  h.geometry.h = get_f64(in);
  h.geometry.nx = get_u64(in);
  h.geometry.ny = get_u64(in);
  h.truncation = get_f64(in);
  h.seed = get_u64(in);
  h.stream = get_u64(in);
  h.horizon = get_f64(in);
  h.variant = get_u32(in);
  h.tag = get_u32(in);
  if (h.geometry.nx > (std::uint64_t{1} << 32) || h.geometry.ny > (std::uint64_t{1} << 32)) {
    throw Error("grid dimensions are implausible");
  }
  rec.values.resize(h.geometry.size());
  for (double& v : rec.values) v = get_f64(in);
  return rec;
}

void write_grid_file(const std::string& path, const std::vector<GridRecord>& recs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& r : recs) write_grid(out, r);
}

std::vector<GridRecord> read_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open grid file: " + path);
  std::vector<GridRecord> recs;
  while (in.peek() != std::char_traits<char>::eof()) recs.push_back(read_grid(in));
  return recs;
}

void write_grid_csv(std::ostream& out, const GridRecord& rec) {
  const GridGeometry& g = rec.header.geometry;
  out << "x,y,value\n";
  out.precision(17);
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      const Vec2 p = g.point(i, j);
      const double v = rec.values[g.index(i, j)];
      out << p.x << ',' << p.y << ',';
      if (!std::isnan(v)) out << v;
      out << '\n';
    }
  }
}

GridRecord to_record(const FieldGrid& f) {
  GridRecord rec;
  rec.header.kind = f.derivative == Derivative::E1 ? GridKind::Gradient : GridKind::Field;
  rec.header.geometry = f.geometry;
  rec.header.truncation = f.truncation;
  rec.header.seed = f.seed;
  rec.header.stream = f.stream;
  rec.values = f.values;
  return rec;
}

FieldGrid field_from_record(const GridRecord& rec) {
  if (rec.header.kind != GridKind::Field && rec.header.kind != GridKind::Gradient) {
    throw Error("grid record does not hold a field");
  }
  FieldGrid f;
  f.geometry = rec.header.geometry;
  f.values = rec.values;
  f.truncation = rec.header.truncation;
  f.derivative = rec.header.kind == GridKind::Gradient ? Derivative::E1 : Derivative::None;
  f.seed = rec.header.seed;
  f.stream = rec.header.stream;
  f.noise_h = f.geometry.h;
  f.kernel_id = "file";
  return f;
}

}  // namespace shadowperc
