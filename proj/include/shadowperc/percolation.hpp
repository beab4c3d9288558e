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

#ifndef SHADOWPERC_PERCOLATION_HPP_
#define SHADOWPERC_PERCOLATION_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "shadowperc/common.hpp"
#include "shadowperc/kernel.hpp"
#include "shadowperc/shadow.hpp"

namespace shadowperc {

enum class Comparison { GreaterEqual, Greater, LessEqual, Less };
enum class Orientation { Horizontal, Vertical };

const char* to_string(Comparison c);
const char* to_string(Orientation o);

struct SiteMask {
  GridGeometry geometry;
  std::vector<std::uint8_t> open;
  double ell = kNaN;
  Comparison comparison = Comparison::LessEqual;
  std::string source;

  bool at(std::size_t i, std::size_t j) const { return open[geometry.index(i, j)] != 0; }
  std::size_t open_count() const;
  static SiteMask from_bits(std::size_t nx, std::size_t ny, std::vector<std::uint8_t> bits);
};

// Open where alpha compares to ell as requested; invalid sites are closed.
SiteMask threshold(const ShadowField& shadow, double ell, Comparison cmp);

struct ClusterLabels {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<std::int32_t> labels;  // 0 = closed, clusters numbered from 1
  std::size_t count = 0;
  std::vector<std::size_t> sizes;    // sizes[c - 1] for cluster c
  std::map<std::size_t, std::size_t> histogram;  // size -> number of clusters

  std::int32_t at(std::size_t i, std::size_t j) const { return labels[j * nx + i]; }
};

// Union-find with path halving and union by size.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n);
  std::size_t find(std::size_t a);
  bool unite(std::size_t a, std::size_t b);
  std::size_t size_of(std::size_t a) { return size_[find(a)]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

// 4-connected open clusters; labels follow row-major first appearance.
ClusterLabels label_clusters(const SiteMask& mask);

// Inclusive index rectangle [i0, i1] x [j0, j1].
struct SiteRect {
  std::size_t i0 = 0;
  std::size_t j0 = 0;
  std::size_t i1 = 0;
  std::size_t j1 = 0;
};

// Open 4-connected path inside rect joining its left and right sides
// (horizontal) or bottom and top sides (vertical).
bool has_crossing(const SiteMask& mask, const SiteRect& rect, Orientation o);
// Closed 8-connected path inside rect joining the given opposite sides.
bool has_closed_crossing(const SiteMask& mask, const SiteRect& rect, Orientation o);

// Open circuit in outer \ inner surrounding inner, decided as the absence
// of a closed 8-connected path from the sites touching inner to the
// boundary of outer. inner must sit strictly inside outer.
bool has_blocking_circuit(const SiteMask& mask, const SiteRect& inner,
                          const SiteRect& outer);

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, top row first
};

// Black (0) where alpha > ell, white (255) elsewhere. The top image row is
// the largest y.
GrayImage render_mask(const ShadowField& shadow, double ell);
void write_pgm(std::ostream& out, const GrayImage& img);

struct HorizonPolicy {
  double factor = 1.0;  // horizon = factor * lambda unless fixed > 0
  double fixed = 0.0;
  double horizon(double lambda) const { return fixed > 0.0 ? fixed : factor * lambda; }
};

struct CrossingScanConfig {
  Kernel kernel = Kernel::bargmann_fock();
  ShadowVariant variant = ShadowVariant::Discrete;
  double h = 0.25;
  HorizonPolicy horizon;
  double truncation = kInf;
  std::vector<double> ells;
  std::vector<std::int64_t> lambdas;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double budget_seconds = kInf;
};

struct CrossingRow {
  std::string variant;
  std::string kernel;
  double h = 0.0;
  double R = 0.0;
  std::int64_t lambda = 0;
  double ell = 0.0;
  Orientation orientation = Orientation::Horizontal;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double phat = 0.0;
  double std_error = 0.0;
  std::uint64_t seed = 0;
  bool complete = true;
};

struct CrossingTable {
  std::vector<CrossingRow> rows;
  bool complete = true;
};

// P(crossing by {alpha <= ell}) of [0, 2 lambda] x [0, lambda] (horizontal)
// and [0, lambda] x [0, 2 lambda] (vertical). Every trial is thresholded at
// all ells; trial t of lambda index m uses noise stream (m << 32) | t.
CrossingTable crossing_scan(const CrossingScanConfig& cfg);

// Per-realization crossing indicators for one lambda, indexed
// [ell][orientation]; exposed for coupling checks.
std::vector<std::uint8_t> crossing_indicators(const CrossingScanConfig& cfg,
                                              std::int64_t lambda,
                                              std::uint64_t stream);

void write_crossing_csv(std::ostream& out, const CrossingTable& table);

}  // namespace shadowperc

#endif  // SHADOWPERC_PERCOLATION_HPP_
