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

#include "shadowperc/percolation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>
#include <ostream>

#include "shadowperc/csv.hpp"
#include "shadowperc/parallel.hpp"
#include "shadowperc/sampler.hpp"

namespace shadowperc {
namespace {

constexpr int kDx4[4] = {1, -1, 0, 0};
constexpr int kDy4[4] = {0, 0, 1, -1};
constexpr int kDx8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy8[8] = {0, 1, 1, 1, 0, -1, -1, -1};

void check_rect(const SiteMask& mask, const SiteRect& r) {
  if (r.i0 > r.i1 || r.j0 > r.j1 || r.i1 >= mask.geometry.nx || r.j1 >= mask.geometry.ny) {
    throw Error("rectangle does not fit inside the mask");
  }
}

// Search over sites of `rect` whose mask bit equals `state`, starting on one
// side and succeeding on the opposite side.
bool rect_search(const SiteMask& mask, const SiteRect& r, Orientation o,
                 bool state, bool eight) {
  check_rect(mask, r);
  const std::size_t w = r.i1 - r.i0 + 1;
  const std::size_t ht = r.j1 - r.j0 + 1;
  std::vector<std::uint8_t> seen(w * ht, 0);
  std::deque<std::pair<std::size_t, std::size_t>> queue;
  auto usable = [&](std::size_t li, std::size_t lj) {
    return mask.at(r.i0 + li, r.j0 + lj) == state;
  };
  const bool horiz = o == Orientation::Horizontal;
  const std::size_t starts = horiz ? ht : w;
  for (std::size_t s = 0; s < starts; ++s) {
    const std::size_t li = horiz ? 0 : s;
    const std::size_t lj = horiz ? s : 0;
    if (usable(li, lj)) {
      seen[lj * w + li] = 1;
      queue.emplace_back(li, lj);
    }
  }
  const int n = eight ? 8 : 4;
  const int* dx = eight ? kDx8 : kDx4;
  const int* dy = eight ? kDy8 : kDy4;
  while (!queue.empty()) {
    const auto [li, lj] = queue.front();
    queue.pop_front();
    if (horiz ? li == w - 1 : lj == ht - 1) return true;
    for (int d = 0; d < n; ++d) {
      const auto ni = static_cast<std::int64_t>(li) + dx[d];
      const auto nj = static_cast<std::int64_t>(lj) + dy[d];
      if (ni < 0 || nj < 0 || ni >= static_cast<std::int64_t>(w) ||
          nj >= static_cast<std::int64_t>(ht)) {
        continue;
      }
      const auto ui = static_cast<std::size_t>(ni);
      const auto uj = static_cast<std::size_t>(nj);
      if (!seen[uj * w + ui] && usable(ui, uj)) {
        seen[uj * w + ui] = 1;
        queue.emplace_back(ui, uj);
      }
    }
  }
  return false;
}

bool inside(const SiteRect& r, std::int64_t i, std::int64_t j) {
  return i >= static_cast<std::int64_t>(r.i0) && i <= static_cast<std::int64_t>(r.i1) &&
         j >= static_cast<std::int64_t>(r.j0) && j <= static_cast<std::int64_t>(r.j1);
}

}  // namespace

const char* to_string(Comparison c) {
  switch (c) {
    case Comparison::GreaterEqual: return ">=";
    case Comparison::Greater: return ">";
    case Comparison::LessEqual: return "<=";
    case Comparison::Less: return "<";
  }
  return "?";
}

const char* to_string(Orientation o) {
  return o == Orientation::Horizontal ? "h" : "v";
}

std::size_t SiteMask::open_count() const {
  return static_cast<std::size_t>(std::count(open.begin(), open.end(), 1));
}

SiteMask SiteMask::from_bits(std::size_t nx, std::size_t ny, std::vector<std::uint8_t> bits) {
  if (bits.size() != nx * ny) throw Error("mask bits do not match dimensions");
  SiteMask m;
  m.geometry = {{0.0, 0.0}, 1.0, nx, ny};
  for (auto& b : bits) b = b ? 1 : 0;
  m.open = std::move(bits);
  m.source = "bits";
  return m;
}

SiteMask threshold(const ShadowField& shadow, double ell, Comparison cmp) {
  SiteMask m;
  m.geometry = shadow.geometry;
  m.ell = ell;
  m.comparison = cmp;
  m.source = shadow.source;
  m.open.assign(shadow.alpha.size(), 0);
  for (std::size_t t = 0; t < shadow.alpha.size(); ++t) {
    if (!shadow.valid[t]) continue;
    const double a = shadow.alpha[t];
    bool o = false;
    switch (cmp) {
      case Comparison::GreaterEqual: o = a >= ell; break;
      case Comparison::Greater: o = a > ell; break;
      case Comparison::LessEqual: o = a <= ell; break;
      case Comparison::Less: o = a < ell; break;
    }
    m.open[t] = o ? 1 : 0;
  }
  return m;
}

DisjointSets::DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t DisjointSets::find(std::size_t a) {
  while (parent_[a] != a) {
    parent_[a] = parent_[parent_[a]];
    a = parent_[a];
  }
  return a;
}

bool DisjointSets::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = a;
  size_[a] += size_[b];
  return true;
}

ClusterLabels label_clusters(const SiteMask& mask) {
  const std::size_t nx = mask.geometry.nx, ny = mask.geometry.ny;
  DisjointSets ds(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      if (!mask.at(i, j)) continue;
      if (i + 1 < nx && mask.at(i + 1, j)) ds.unite(j * nx + i, j * nx + i + 1);
      if (j + 1 < ny && mask.at(i, j + 1)) ds.unite(j * nx + i, (j + 1) * nx + i);
    }
  }
  ClusterLabels out;
  out.nx = nx;
  out.ny = ny;
  out.labels.assign(nx * ny, 0);
  std::vector<std::int32_t> root_label(nx * ny, 0);
  for (std::size_t t = 0; t < nx * ny; ++t) {
    if (!mask.open[t]) continue;
    const std::size_t root = ds.find(t);
    if (root_label[root] == 0) {
      root_label[root] = static_cast<std::int32_t>(++out.count);
      out.sizes.push_back(0);
    }
    out.labels[t] = root_label[root];
    ++out.sizes[static_cast<std::size_t>(root_label[root] - 1)];
  }
  for (std::size_t s : out.sizes) ++out.histogram[s];
  return out;
}

bool has_crossing(const SiteMask& mask, const SiteRect& rect, Orientation o) {
  return rect_search(mask, rect, o, true, false);
}

bool has_closed_crossing(const SiteMask& mask, const SiteRect& rect, Orientation o) {
  return rect_search(mask, rect, o, false, true);
}

bool has_blocking_circuit(const SiteMask& mask, const SiteRect& inner,
                          const SiteRect& outer) {
  check_rect(mask, outer);
  if (!(inner.i0 > outer.i0 && inner.j0 > outer.j0 && inner.i1 < outer.i1 &&
        inner.j1 < outer.j1 && inner.i0 <= inner.i1 && inner.j0 <= inner.j1)) {
    throw Error("inner rectangle must lie strictly inside the outer one");
  }
  const std::size_t w = outer.i1 - outer.i0 + 1;
  const std::size_t ht = outer.j1 - outer.j0 + 1;
  std::vector<std::uint8_t> seen(w * ht, 0);
  std::deque<std::pair<std::int64_t, std::int64_t>> queue;
  auto closed_annulus = [&](std::int64_t i, std::int64_t j) {
    return inside(outer, i, j) && !inside(inner, i, j) &&
           !mask.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  };
  auto mark = [&](std::int64_t i, std::int64_t j) {
    auto& s = seen[static_cast<std::size_t>(j - static_cast<std::int64_t>(outer.j0)) * w +
                   static_cast<std::size_t>(i - static_cast<std::int64_t>(outer.i0))];
    if (s) return false;
    s = 1;
    return true;
  };
  // Closed annulus sites touching inner (8-adjacency) start the search.
  for (auto i = static_cast<std::int64_t>(inner.i0) - 1;
       i <= static_cast<std::int64_t>(inner.i1) + 1; ++i) {
    for (auto j = static_cast<std::int64_t>(inner.j0) - 1;
         j <= static_cast<std::int64_t>(inner.j1) + 1; ++j) {
      if (closed_annulus(i, j) && mark(i, j)) queue.emplace_back(i, j);
    }
  }
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    if (i == static_cast<std::int64_t>(outer.i0) || i == static_cast<std::int64_t>(outer.i1) ||
        j == static_cast<std::int64_t>(outer.j0) || j == static_cast<std::int64_t>(outer.j1)) {
      return false;
    }
    for (int d = 0; d < 8; ++d) {
      const std::int64_t ni = i + kDx8[d], nj = j + kDy8[d];
      if (closed_annulus(ni, nj) && mark(ni, nj)) queue.emplace_back(ni, nj);
    }
  }
  return true;
}

GrayImage render_mask(const ShadowField& shadow, double ell) {
  GrayImage img;
  img.width = shadow.geometry.nx;
  img.height = shadow.geometry.ny;
  img.pixels.resize(img.width * img.height);
  for (std::size_t row = 0; row < img.height; ++row) {
    const std::size_t j = img.height - 1 - row;
    for (std::size_t i = 0; i < img.width; ++i) {
      const double a = shadow.alpha[shadow.geometry.index(i, j)];
      img.pixels[row * img.width + i] = a > ell ? 0 : 255;
    }
  }
  return img;
}

void write_pgm(std::ostream& out, const GrayImage& img) {
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("failed to write PGM image");
}

std::vector<std::uint8_t> crossing_indicators(const CrossingScanConfig& cfg,
                                              std::int64_t lambda,
                                              std::uint64_t stream) {
  if (lambda < 1) throw Error("lambda must be at least 1");
  const double R = cfg.horizon.horizon(static_cast<double>(lambda));
  const double L = static_cast<double>(lambda);
  const Rect window{0.0, 0.0, 2.0 * L + R, 2.0 * L};
  ShadowField shadow;
  std::size_t side = 0;  // lattice sites per lambda
  if (cfg.variant == ShadowVariant::Discrete) {
    const double inv = 1.0 / cfg.h;
    const auto stride = static_cast<int>(std::llround(inv));
    if (stride < 1 || std::abs(stride * cfg.h - 1.0) > 1e-9) {
      throw Error("discrete variant needs 1/h to be an integer");
    }
    const auto Rint = static_cast<std::int64_t>(std::llround(R));
    if (Rint < 1 || std::abs(static_cast<double>(Rint) - R) > 1e-9) {
      throw Error("discrete variant needs an integer horizon >= 1");
    }
    FieldOptions opt;
    opt.truncation = cfg.truncation;
    opt.stride = stride;
    const NoisePatch noise =
        sample_noise(required_noise_region(cfg.kernel, cfg.h, window, opt), cfg.h,
                     cfg.seed, stream);
    const FieldGrid f = convolve_field(noise, cfg.kernel, window, opt);
    shadow = shadow_discrete(f, Rint, ShadowMethod::Hull);
    side = static_cast<std::size_t>(lambda);
  } else {
    const double steps = L / cfg.h;
    if (std::abs(steps - std::round(steps)) > 1e-9) {
      throw Error("continuous variant needs lambda to be a multiple of h");
    }
    const Rect region =
        truncation_noise_region(cfg.kernel, cfg.h, {0.0, 0.0, 2.0 * L, 2.0 * L},
                                {{R, cfg.truncation}});
    const NoisePatch noise = sample_noise(region, cfg.h, cfg.seed, stream);
    FieldOptions opt;
    opt.truncation = cfg.truncation;
    const FieldGrid f = convolve_field(noise, cfg.kernel, window, opt);
    opt.derivative = Derivative::E1;
    const FieldGrid g = convolve_field(noise, cfg.kernel, window, opt);
    shadow = shadow_continuous(f, g, R);
    side = static_cast<std::size_t>(std::llround(steps));
  }
  const SiteRect hrect{0, 0, 2 * side, side};
  const SiteRect vrect{0, 0, side, 2 * side};
  std::vector<std::uint8_t> out;
  out.reserve(2 * cfg.ells.size());
  for (double ell : cfg.ells) {
    const SiteMask m = threshold(shadow, ell, Comparison::LessEqual);
    out.push_back(has_crossing(m, hrect, Orientation::Horizontal) ? 1 : 0);
    out.push_back(has_crossing(m, vrect, Orientation::Vertical) ? 1 : 0);
  }
  return out;
}

CrossingTable crossing_scan(const CrossingScanConfig& cfg) {
  if (cfg.trials < 1) throw Error("crossing_scan needs at least one trial");
  CrossingTable table;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  for (std::size_t m = 0; m < cfg.lambdas.size(); ++m) {
    const std::int64_t lambda = cfg.lambdas[m];
    std::vector<std::vector<std::uint8_t>> results(cfg.trials);
    std::vector<std::uint8_t> done(cfg.trials, 0);
    parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
      if (elapsed() > cfg.budget_seconds) return;
      results[t] = crossing_indicators(cfg, lambda, (std::uint64_t{m} << 32) | t);
      done[t] = 1;
    });
    // Only a contiguous prefix of trials is reported so that partial tables
    // do not depend on scheduling.
    std::size_t n = 0;
    while (n < cfg.trials && done[n]) ++n;
    const bool complete = n == cfg.trials;
    table.complete = table.complete && complete;
    for (std::size_t e = 0; e < cfg.ells.size(); ++e) {
      for (int o = 0; o < 2; ++o) {
        CrossingRow row;
        row.variant = to_string(cfg.variant);
        row.kernel = cfg.kernel.id();
        row.h = cfg.h;
        row.R = cfg.horizon.horizon(static_cast<double>(lambda));
        row.lambda = lambda;
        row.ell = cfg.ells[e];
        row.orientation = o == 0 ? Orientation::Horizontal : Orientation::Vertical;
        row.trials = n;
        for (std::size_t t = 0; t < n; ++t) row.successes += results[t][2 * e + o];
        row.phat = n ? static_cast<double>(row.successes) / static_cast<double>(n) : 0.0;
        row.std_error = n ? std::sqrt(row.phat * (1.0 - row.phat) / static_cast<double>(n)) : 0.0;
        row.seed = cfg.seed;
        row.complete = complete;
        table.rows.push_back(row);
      }
    }
  }
  return table;
}

void write_crossing_csv(std::ostream& out, const CrossingTable& table) {
  out << "variant,kernel,h,R,lambda,ell,orientation,trials,successes,phat,stderr,seed,complete\n";
  for (const auto& r : table.rows) {
    out << csv_field(r.variant) << ',' << csv_field(r.kernel) << ',' << csv_number(r.h)
        << ',' << csv_number(r.R) << ',' << r.lambda << ',' << csv_number(r.ell) << ','
        << to_string(r.orientation) << ',' << r.trials << ',' << r.successes << ','
        << csv_number(r.phat) << ',' << csv_number(r.std_error) << ',' << r.seed << ','
        << (r.complete ? 1 : 0) << '\n';
  }
}

}  // namespace shadowperc
