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

#include "shadowperc/rng.hpp"

#include <cmath>
#include <numbers>

namespace shadowperc {
namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;
constexpr std::uint32_t kStreamKeyTag = 0x5EED5EEDu;

inline std::uint32_t lo32(std::uint64_t v) {
  return static_cast<std::uint32_t>(v);
}
inline std::uint32_t hi32(std::uint64_t v) {
  return static_cast<std::uint32_t>(v >> 32);
}

std::array<double, 2> box_muller(std::uint64_t a, std::uint64_t b) {
  const double u1 = bits_to_open_unit(a);
  const double u2 = bits_to_open_unit(b);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(t), r * std::sin(t)};
}

std::int64_t floor_div2(std::int64_t i) { return i >= 0 ? i / 2 : -((1 - i) / 2); }

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    ctr = {hi32(p1) ^ ctr[1] ^ key[0], lo32(p1), hi32(p0) ^ ctr[3] ^ key[1],
           lo32(p0)};
  }
  return ctr;
}

double bits_to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

std::array<double, 2> cell_normal_pair(std::uint64_t seed, std::uint64_t stream,
                                       std::int64_t k, std::int64_t j) {
  const PhiloxCounter out = philox4x32_10(
      {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(j),
       lo32(stream), hi32(stream)},
      {lo32(seed), hi32(seed)});
  return box_muller((static_cast<std::uint64_t>(out[1]) << 32) | out[0],
                    (static_cast<std::uint64_t>(out[3]) << 32) | out[2]);
}

double cell_normal(std::uint64_t seed, std::uint64_t stream, std::int64_t i,
                   std::int64_t j) {
  const std::int64_t k = floor_div2(i);
  return cell_normal_pair(seed, stream, k, j)[static_cast<std::size_t>(i - 2 * k)];
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream)
    : key_{lo32(seed), hi32(seed) ^ kStreamKeyTag}, stream_(stream) {}

void RandomStream::refill() {
  const PhiloxCounter out = philox4x32_10(
      {lo32(block_), hi32(block_), lo32(stream_), hi32(stream_)}, key_);
  ++block_;
  buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  buffered_ = 2;
}

std::uint64_t RandomStream::next_u64() {
  if (buffered_ == 0) refill();
  return buffer_[2 - buffered_--];
}

double RandomStream::uniform() { return bits_to_open_unit(next_u64()); }

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const std::uint64_t a = next_u64();
  const std::uint64_t b = next_u64();
  const auto z = box_muller(a, b);
  spare_normal_ = z[1];
  has_spare_ = true;
  return z[0];
}

}  // namespace shadowperc
