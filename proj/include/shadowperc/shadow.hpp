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

#ifndef SHADOWPERC_SHADOW_HPP_
#define SHADOWPERC_SHADOW_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shadowperc/common.hpp"
#include "shadowperc/grid_io.hpp"
#include "shadowperc/kernel.hpp"
#include "shadowperc/sampler.hpp"

namespace shadowperc {

enum class ShadowVariant { Continuous, Discrete };
enum class ShadowMethod { BruteForce, Hull };

const char* to_string(ShadowVariant v);

// Grid of shadow slopes alpha. Sites lacking the full right padding for the
// horizon are invalid: alpha and r are NaN there.
struct ShadowField {
  GridGeometry geometry;
  std::vector<double> alpha;
  std::vector<double> r;  // smallest maximizing horizon r(z)
  std::vector<std::uint8_t> valid;
  ShadowVariant variant = ShadowVariant::Discrete;
  double horizon = kInf;
  std::string source;

  double at(std::size_t i, std::size_t j) const { return alpha[geometry.index(i, j)]; }
  bool is_valid(std::size_t i, std::size_t j) const { return valid[geometry.index(i, j)] != 0; }
  std::size_t valid_count() const;
};

// Slope between grid point (i, j) and (i, j) + r e1; r = 0 reads the e1
// gradient grid. r must be a multiple of the grid spacing.
double tau(const FieldGrid& field, const FieldGrid* gradient, std::size_t i,
           std::size_t j, double r);

// Discrete shadow of a row-major grid with unit spacing. R = nullopt uses
// every site to the right.
ShadowField shadow_discrete(std::span<const double> values, std::size_t nx,
                            std::size_t ny, std::optional<std::int64_t> R,
                            ShadowMethod method = ShadowMethod::BruteForce);
// Same on a field grid; slopes are taken per lattice step of the grid.
ShadowField shadow_discrete(const FieldGrid& X, std::optional<std::int64_t> R,
                            ShadowMethod method = ShadowMethod::BruteForce);

// alpha_R from a field and its e1 gradient sharing one lattice: maximum of
// the gradient and the slopes at r = h, 2h, ..., R.
ShadowField shadow_continuous(const FieldGrid& field, const FieldGrid& gradient,
                              double R, ShadowMethod method = ShadowMethod::Hull);

struct RowShadow {
  std::vector<double> alpha;     // NaN where invalid
  std::vector<std::int64_t> r;   // 0 where invalid
};

// Upper-hull evaluation of the discrete shadow of one row in O(n log n).
RowShadow shadow_fast_row(std::span<const double> row, std::optional<std::int64_t> R);
// Direct evaluation over every r, the reference for the fast path.
RowShadow shadow_brute_row(std::span<const double> row, std::optional<std::int64_t> R);

std::vector<GridRecord> to_records(const ShadowField& s);
ShadowField shadow_from_records(const std::vector<GridRecord>& recs);

struct HorizonKernelPair {
  double horizon = 0.0;     // R1
  double truncation = kInf; // R2
};

struct TruncationErrorRow {
  HorizonKernelPair pair;
  double sup_error = 0.0;
};

// Continuous shadow alpha_{R1}^{f_{R2}} restricted to the window's lattice
// points, built from the given noise.
ShadowField alpha_on_window(const NoisePatch& noise, const Kernel& k,
                            const Rect& window, HorizonKernelPair pair,
                            unsigned workers = 1);

// Noise region serving alpha_on_window for every pair.
Rect truncation_noise_region(const Kernel& k, double h, const Rect& window,
                             const std::vector<HorizonKernelPair>& pairs);

// Sup over the window of |alpha_pair - alpha_reference| for each pair, all
// from one noise realization.
std::vector<TruncationErrorRow> truncation_error(
    const NoisePatch& noise, const Kernel& k,
    const std::vector<HorizonKernelPair>& pairs, HorizonKernelPair reference,
    const Rect& window, unsigned workers = 1);

struct SeedLevelResult {
  double level = -kInf;
  std::vector<double> sups;   // per-trial sup of alpha over the box
  double coverage = 0.0;      // fraction of trials with sup <= level
  double coverage_lower95 = 0.0;
  std::string note;
};

// Empirical p-quantile of sup over [0, lambda]^2 of alpha_lambda^{f_lambda}.
// Trial t uses noise stream t.
SeedLevelResult seed_level_estimate(const Kernel& k, double lambda,
                                    std::size_t trials, double p, double h,
                                    std::uint64_t seed, unsigned workers = 1);

}  // namespace shadowperc

#endif  // SHADOWPERC_SHADOW_HPP_
