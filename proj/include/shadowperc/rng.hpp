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

#ifndef SHADOWPERC_RNG_HPP_
#define SHADOWPERC_RNG_HPP_

#include <array>
#include <cstdint>

namespace shadowperc {

// Counter-based Philox4x32-10 generator. Every draw is a pure function of
// (key, counter), so patches, trials and workers can be generated in any
// order with identical results.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key);

// Maps 64 random bits to a double in the open interval (0, 1).
double bits_to_open_unit(std::uint64_t bits);

// Standard normal white-noise value of lattice cell (i, j). Cells are paired
// along i so one Philox block yields two Box-Muller normals.
double cell_normal(std::uint64_t seed, std::uint64_t stream, std::int64_t i,
                   std::int64_t j);

// Both normals of the cell pair (2k, j), (2k + 1, j).
std::array<double, 2> cell_normal_pair(std::uint64_t seed, std::uint64_t stream,
                                       std::int64_t k, std::int64_t j);

// Sequential stream of draws keyed by (seed, stream). Uses a key domain
// disjoint from the white-noise cells.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double uniform();  // (0, 1)
  double normal();

 private:
  void refill();

  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace shadowperc

#endif  // SHADOWPERC_RNG_HPP_
