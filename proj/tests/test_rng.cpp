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

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "shadowperc/rng.hpp"

using namespace shadowperc;

TEST_CASE("philox4x32-10 known-answer vectors") {
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                      {0xffffffffu, 0xffffffffu}) ==
        PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                      {0xa4093822u, 0x299f31d0u}) ==
        PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("open unit interval mapping never hits the endpoints") {
  CHECK(bits_to_open_unit(0) > 0.0);
  CHECK(bits_to_open_unit(~std::uint64_t{0}) < 1.0);
  CHECK(bits_to_open_unit(~std::uint64_t{0}) == 1.0 - 0x1.0p-53);
  CHECK(bits_to_open_unit(0) == 0x1.0p-53);
  CHECK(bits_to_open_unit(std::uint64_t{1} << 63) == 0.5 + 0x1.0p-53);
}

TEST_CASE("cell normals are pure functions of their coordinates") {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<std::int64_t> coord(-1000000, 1000000);
  for (int t = 0; t < 500; ++t) {
    const std::uint64_t seed = gen(), stream = gen() % 16;
    const std::int64_t i = coord(gen), j = coord(gen);
    const double a = cell_normal(seed, stream, i, j);
    (void)cell_normal(seed, stream, i + 1, j - 3);  // unrelated draw in between
    CHECK(cell_normal(seed, stream, i, j) == a);
    const std::int64_t k = i >= 0 ? i / 2 : -((-i + 1) / 2);
    const auto pair = cell_normal_pair(seed, stream, k, j);
    CHECK(pair[static_cast<std::size_t>(i - 2 * k)] == a);
  }
}

TEST_CASE("cell normals have standard moments and no neighbour correlation") {
  const std::int64_t n = 400;
  double s = 0.0, s2 = 0.0, cx = 0.0, cy = 0.0;
  for (std::int64_t j = -n / 2; j < n / 2; ++j) {
    for (std::int64_t i = -n / 2; i < n / 2; ++i) {
      const double v = cell_normal(11, 0, i, j);
      s += v;
      s2 += v * v;
      cx += v * cell_normal(11, 0, i + 1, j);
      cy += v * cell_normal(11, 0, i, j + 1);
    }
  }
  const double N = static_cast<double>(n * n);
  const double se = 1.0 / std::sqrt(N);
  CHECK(std::abs(s / N) < 4.0 * se);
  CHECK(std::abs(s2 / N - 1.0) < 4.0 * std::sqrt(2.0) * se);
  CHECK(std::abs(cx / N) < 4.0 * se);
  CHECK(std::abs(cy / N) < 4.0 * se);
}

TEST_CASE("streams and seeds decorrelate noise") {
  double c = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) c += cell_normal(5, 0, i, 0) * cell_normal(5, 1, i, 0);
  CHECK(std::abs(c / n) < 4.0 / std::sqrt(n));
  CHECK(cell_normal(5, 0, 0, 0) != cell_normal(6, 0, 0, 0));
}

TEST_CASE("random streams are reproducible and distinct") {
  RandomStream a(3, 9), b(3, 9), c(3, 10);
  std::vector<double> va, vb;
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    va.push_back(a.normal());
    vb.push_back(b.normal());
    differs = differs || va.back() != c.normal();
  }
  CHECK(va == vb);
  CHECK(differs);

  RandomStream u(1, 2);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = u.uniform();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(s2 / n - 1.0 / 3.0) < 0.005);

  RandomStream g(1, 3);
  double m = 0.0, v = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    m += x;
    v += x * x;
  }
  CHECK(std::abs(m / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(v / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("random stream keys do not collide with white-noise cells") {
  // Stream 0 of seed s must not reproduce the cell normals of seed s.
  RandomStream rs(42, 0);
  int equal = 0;
  for (int i = 0; i < 64; ++i) equal += rs.normal() == cell_normal(42, 0, i, 0);
  CHECK(equal == 0);
}
