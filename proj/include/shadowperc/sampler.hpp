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

#ifndef SHADOWPERC_SAMPLER_HPP_
#define SHADOWPERC_SAMPLER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "shadowperc/common.hpp"
#include "shadowperc/kernel.hpp"

namespace shadowperc {

// Box of lattice indices [i0, i0 + nx) x [j0, j0 + ny) on h Z^2.
struct LatticeBox {
  std::int64_t i0 = 0;
  std::int64_t j0 = 0;
  std::int64_t nx = 0;
  std::int64_t ny = 0;

  std::int64_t i1() const { return i0 + nx; }  // exclusive
  std::int64_t j1() const { return j0 + ny; }
  bool contains(std::int64_t i, std::int64_t j) const {
    return i >= i0 && i < i1() && j >= j0 && j < j1();
  }
  bool contains(const LatticeBox& o) const {
    return o.i0 >= i0 && o.i1() <= i1() && o.j0 >= j0 && o.j1() <= j1();
  }
  bool intersects(const LatticeBox& o) const {
    return o.i0 < i1() && i0 < o.i1() && o.j0 < j1() && j0 < o.j1();
  }
  friend bool operator==(const LatticeBox&, const LatticeBox&) = default;
};

// Lattice points of h Z^2 lying in a closed rectangle, with a small
// tolerance so that endpoints that are multiples of h are included.
LatticeBox lattice_points_in(const Rect& r, double h);

inline constexpr std::size_t kDefaultMaxNoiseCells = std::size_t{1} << 27;

// Discretized white noise: cell (i, j) is centred at h (i, j) and carries an
// i.i.d. N(0,1) value; the noise integral over the cell is h times it.
class NoisePatch {
 public:
  NoisePatch(LatticeBox box, double h, std::uint64_t seed, std::uint64_t stream,
             std::vector<double> values);

  const LatticeBox& box() const { return box_; }
  double h() const { return h_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  const std::vector<double>& values() const { return values_; }
  GridGeometry geometry() const;
  double at(std::int64_t i, std::int64_t j) const {
    return values_[static_cast<std::size_t>((j - box_.j0) * box_.nx + (i - box_.i0))];
  }

  // Cellwise sum; both patches must share box and spacing.
  NoisePatch operator+(const NoisePatch& other) const;

 private:
  LatticeBox box_;
  double h_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::vector<double> values_;
};

// Noise over every cell centred in `region`. The realization is global: two
// patches with the same (seed, stream, h) agree on their common cells.
NoisePatch sample_noise(const Rect& region, double h, std::uint64_t seed,
                        std::uint64_t stream,
                        std::size_t max_cells = kDefaultMaxNoiseCells,
                        unsigned workers = 1);

enum class Derivative { None, E1 };

struct FieldOptions {
  double truncation = kInf;  // R; inf means the plain kernel
  Derivative derivative = Derivative::None;
  int stride = 1;            // output every stride-th lattice point
  double support_tol = 1e-12;
  unsigned workers = 1;
};

struct FieldGrid {
  GridGeometry geometry;  // spacing is stride * noise h
  std::vector<double> values;
  std::string kernel_id;
  double truncation = kInf;
  Derivative derivative = Derivative::None;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double noise_h = 0.0;
  std::int64_t lattice_i0 = 0;  // global noise-lattice index of point (0, 0)
  std::int64_t lattice_j0 = 0;
  int stride = 1;

  double at(std::size_t i, std::size_t j) const {
    return values[geometry.index(i, j)];
  }
};

// Precomputed convolution weights h * K(a h, b h) over a disc of offsets.
struct Stencil {
  std::int64_t radius = 0;             // max |offset| in cells
  double support = 0.0;                // continuum cutoff radius
  std::vector<std::int64_t> half_width;  // per row b = -radius..radius
  std::vector<std::vector<double>> reversed_rows;
};

Stencil make_stencil(const Kernel& k, double h, const FieldOptions& opt);

// Output lattice points of a window for the given options.
LatticeBox output_points(const Rect& window, double h, int stride);

// Noise cells that can influence the field on `window`.
LatticeBox dependency_footprint(const Kernel& k, double h, const Rect& window,
                                const FieldOptions& opt);

// Continuum rectangle whose noise cells cover the footprint.
Rect required_noise_region(const Kernel& k, double h, const Rect& window,
                           const FieldOptions& opt);

// f = h sum_c (q chi_R)(x - c) xi_c, or its e1 derivative, on the window's
// lattice points.
FieldGrid convolve_field(const NoisePatch& noise, const Kernel& k,
                         const Rect& window, const FieldOptions& opt = {});

struct CovarianceEstimate {
  Vec2 lag;
  double estimate = 0.0;
  double std_error = 0.0;
};

// Monte Carlo estimates of E[f(0) f(lag)]; lags must lie on h Z^2. Trial t
// uses noise stream t.
std::vector<CovarianceEstimate> empirical_covariance(
    const Kernel& k, double h, const std::vector<Vec2>& lags, std::size_t trials,
    std::uint64_t seed, unsigned workers = 1, double truncation = kInf);

}  // namespace shadowperc

#endif  // SHADOWPERC_SAMPLER_HPP_
