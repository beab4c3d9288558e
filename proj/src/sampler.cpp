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

#include "shadowperc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shadowperc/parallel.hpp"
#include "shadowperc/rng.hpp"

namespace shadowperc {
namespace {

constexpr double kLatticeSlack = 1e-9;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

struct Support {
  double radius = 0.0;        // continuum cutoff
  std::int64_t cells = 0;     // max |offset| in cells
  bool open = false;          // truncation cutoff: weights vanish at radius
};

Support stencil_support(const Kernel& k, double h, const FieldOptions& opt) {
  double s = k.support_radius(opt.support_tol);
  if (opt.derivative == Derivative::E1) {
    // The derivative can outlive the kernel's own tolerance radius.
    while (std::abs(k.radial_derivative(s)) >= opt.support_tol &&
           s < 1e6 / k.length_scale()) {
      s += h;
    }
  }
  Support sup;
  if (std::isfinite(opt.truncation) && 0.5 * opt.truncation <= s) {
    sup.radius = 0.5 * opt.truncation;
    sup.open = true;
    sup.cells =
        static_cast<std::int64_t>(std::ceil(sup.radius / h - kLatticeSlack)) - 1;
  } else {
    sup.radius = s;
    sup.cells = static_cast<std::int64_t>(std::floor(s / h + kLatticeSlack));
  }
  return sup;
}

bool in_support(const Support& sup, double d2) {
  const double s2 = sup.radius * sup.radius;
  return sup.open ? d2 < s2 : d2 <= s2 * (1.0 + 1e-12);
}

}  // namespace

LatticeBox lattice_points_in(const Rect& r, double h) {
  const auto i0 = static_cast<std::int64_t>(std::ceil(r.x0 / h - kLatticeSlack));
  const auto i1 = static_cast<std::int64_t>(std::floor(r.x1 / h + kLatticeSlack));
  const auto j0 = static_cast<std::int64_t>(std::ceil(r.y0 / h - kLatticeSlack));
  const auto j1 = static_cast<std::int64_t>(std::floor(r.y1 / h + kLatticeSlack));
  return {i0, j0, std::max<std::int64_t>(0, i1 - i0 + 1),
          std::max<std::int64_t>(0, j1 - j0 + 1)};
}

NoisePatch::NoisePatch(LatticeBox box, double h, std::uint64_t seed,
                       std::uint64_t stream, std::vector<double> values)
    : box_(box), h_(h), seed_(seed), stream_(stream), values_(std::move(values)) {
  if (!(h > 0.0)) throw Error("noise spacing must be positive");
  if (values_.size() != static_cast<std::size_t>(box_.nx * box_.ny)) {
    throw Error("noise values do not match the patch dimensions");
  }
}

GridGeometry NoisePatch::geometry() const {
  return {{h_ * static_cast<double>(box_.i0), h_ * static_cast<double>(box_.j0)},
          h_,
          static_cast<std::size_t>(box_.nx),
          static_cast<std::size_t>(box_.ny)};
}

NoisePatch NoisePatch::operator+(const NoisePatch& other) const {
  if (!(box_ == other.box_) || h_ != other.h_) {
    throw Error("noise patches must share box and spacing to be added");
  }
  std::vector<double> sum(values_.size());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = values_[i] + other.values_[i];
  return NoisePatch(box_, h_, seed_, stream_, std::move(sum));
}

NoisePatch sample_noise(const Rect& region, double h, std::uint64_t seed,
                        std::uint64_t stream, std::size_t max_cells,
                        unsigned workers) {
  if (!(h > 0.0)) throw Error("noise spacing h must be positive");
  if (region.degenerate()) throw Error("noise region is degenerate");
  const LatticeBox box = lattice_points_in(region, h);
  const double cells = static_cast<double>(box.nx) * static_cast<double>(box.ny);
  if (cells > static_cast<double>(max_cells)) {
    std::ostringstream os;
    os << "noise patch of " << box.nx << " x " << box.ny
       << " cells exceeds the budget of " << max_cells << " cells";
    throw BudgetError(os.str());
  }
  std::vector<double> values(static_cast<std::size_t>(box.nx * box.ny));
  const std::int64_t k0 = floor_div(box.i0, 2);
  const std::int64_t k1 = floor_div(box.i1() - 1, 2);
  parallel_for(static_cast<std::size_t>(box.ny), workers, [&](std::size_t row) {
    const std::int64_t j = box.j0 + static_cast<std::int64_t>(row);
    double* out = values.data() + row * static_cast<std::size_t>(box.nx);
    for (std::int64_t k = k0; k <= k1; ++k) {
      const auto pair = cell_normal_pair(seed, stream, k, j);
      for (std::int64_t s = 0; s < 2; ++s) {
        const std::int64_t i = 2 * k + s;
        if (i >= box.i0 && i < box.i1()) {
          out[i - box.i0] = pair[static_cast<std::size_t>(s)];
        }
      }
    }
  });
  return NoisePatch(box, h, seed, stream, std::move(values));
}

Stencil make_stencil(const Kernel& k, double h, const FieldOptions& opt) {
  if (!(h > 0.0)) throw Error("lattice spacing h must be positive");
  if (std::isfinite(opt.truncation) && !(opt.truncation >= 1.0)) {
    throw Error("truncation radius must be at least 1");
  }
  Stencil st;
  const Support sup = stencil_support(k, h, opt);
  st.support = sup.radius;
  st.radius = sup.cells;
  for (std::int64_t b = -st.radius; b <= st.radius; ++b) {
    const double y = h * static_cast<double>(b);
    std::int64_t half = -1;
    for (std::int64_t a = 0; a <= st.radius; ++a) {
      const double x = h * static_cast<double>(a);
      if (in_support(sup, x * x + y * y)) half = a;
    }
    std::vector<double> row;
    if (half >= 0) {
      row.resize(static_cast<std::size_t>(2 * half + 1));
      for (std::int64_t t = 0; t <= 2 * half; ++t) {
        const std::int64_t a = half - t;
        const Vec2 off{h * static_cast<double>(a), y};
        double w = 0.0;
        if (opt.derivative == Derivative::None) {
          w = eval_truncated(k, opt.truncation, off);
        } else {
          w = kernel_gradient(k, off, opt.truncation).value.x;
        }
        row[static_cast<std::size_t>(t)] = h * w;
      }
    }
    st.half_width.push_back(half);
    st.reversed_rows.push_back(std::move(row));
  }
  return st;
}

LatticeBox output_points(const Rect& window, double h, int stride) {
  if (stride < 1) throw Error("stride must be at least 1");
  LatticeBox all = lattice_points_in(window, h);
  if (all.nx == 0 || all.ny == 0) throw Error("window contains no lattice points");
  all.nx = (all.nx - 1) / stride + 1;
  all.ny = (all.ny - 1) / stride + 1;
  return all;  // nx, ny count output points; spacing stride * h
}

LatticeBox dependency_footprint(const Kernel& k, double h, const Rect& window,
                                const FieldOptions& opt) {
  const LatticeBox out = output_points(window, h, opt.stride);
  const std::int64_t r = stencil_support(k, h, opt).cells;
  const std::int64_t last_i = out.i0 + (out.nx - 1) * opt.stride;
  const std::int64_t last_j = out.j0 + (out.ny - 1) * opt.stride;
  return {out.i0 - r, out.j0 - r, last_i - out.i0 + 2 * r + 1,
          last_j - out.j0 + 2 * r + 1};
}

Rect required_noise_region(const Kernel& k, double h, const Rect& window,
                           const FieldOptions& opt) {
  const LatticeBox f = dependency_footprint(k, h, window, opt);
  return {h * static_cast<double>(f.i0), h * static_cast<double>(f.j0),
          h * static_cast<double>(f.i1() - 1), h * static_cast<double>(f.j1() - 1)};
}

FieldGrid convolve_field(const NoisePatch& noise, const Kernel& k,
                         const Rect& window, const FieldOptions& opt) {
  const double h = noise.h();
  const LatticeBox out = output_points(window, h, opt.stride);
  const Stencil st = make_stencil(k, h, opt);
  const LatticeBox need = dependency_footprint(k, h, window, opt);
  if (!noise.box().contains(need)) {
    std::ostringstream os;
    os << "insufficient noise margin: the window needs noise cells [" << need.i0
       << ", " << need.i1() - 1 << "] x [" << need.j0 << ", " << need.j1() - 1
       << "], i.e. a margin of " << st.support << " (" << st.radius
       << " cells) around the window";
    throw Error(os.str());
  }

  FieldGrid g;
  g.geometry = {{h * static_cast<double>(out.i0), h * static_cast<double>(out.j0)},
                h * opt.stride,
                static_cast<std::size_t>(out.nx),
                static_cast<std::size_t>(out.ny)};
  g.values.assign(g.geometry.size(), 0.0);
  g.kernel_id = k.id();
  g.truncation = opt.truncation;
  g.derivative = opt.derivative;
  g.seed = noise.seed();
  g.stream = noise.stream();
  g.noise_h = h;
  g.lattice_i0 = out.i0;
  g.lattice_j0 = out.j0;
  g.stride = opt.stride;

  const LatticeBox nb = noise.box();
  const double* xi = noise.values().data();
  parallel_for(g.geometry.ny, opt.workers, [&](std::size_t oj) {
    const std::int64_t gj = out.j0 + static_cast<std::int64_t>(oj) * opt.stride;
    for (std::size_t oi = 0; oi < g.geometry.nx; ++oi) {
      const std::int64_t gi = out.i0 + static_cast<std::int64_t>(oi) * opt.stride;
      double acc = 0.0;
      for (std::int64_t b = -st.radius; b <= st.radius; ++b) {
        const std::size_t rb = static_cast<std::size_t>(b + st.radius);
        const std::int64_t half = st.half_width[rb];
        if (half < 0) continue;
        const std::vector<double>& w = st.reversed_rows[rb];
        const double* src =
            xi + (gj - b - nb.j0) * nb.nx + (gi - half - nb.i0);
        double row = 0.0;
        for (std::size_t t = 0; t < w.size(); ++t) row += w[t] * src[t];
        acc += row;
      }
      g.values[g.geometry.index(oi, oj)] = acc;
    }
  });
  return g;
}

std::vector<CovarianceEstimate> empirical_covariance(
    const Kernel& k, double h, const std::vector<Vec2>& lags, std::size_t trials,
    std::uint64_t seed, unsigned workers, double truncation) {
  if (trials < 2) throw Error("empirical_covariance needs at least two trials");
  Rect window{0.0, 0.0, 0.0, 0.0};
  for (const Vec2& l : lags) {
    for (double c : {l.x / h, l.y / h}) {
      if (std::abs(c - std::round(c)) > 1e-9) {
        throw Error("covariance lags must lie on the sampling lattice");
      }
    }
    window.x0 = std::min(window.x0, l.x);
    window.y0 = std::min(window.y0, l.y);
    window.x1 = std::max(window.x1, l.x);
    window.y1 = std::max(window.y1, l.y);
  }
  FieldOptions opt;
  opt.truncation = truncation;
  const Rect region = required_noise_region(k, h, window, opt);
  const LatticeBox pts = output_points(window, h, 1);

  std::vector<std::vector<double>> products(trials, std::vector<double>(lags.size()));
  parallel_for(trials, workers, [&](std::size_t t) {
    const NoisePatch noise = sample_noise(region, h, seed, t);
    const FieldGrid f = convolve_field(noise, k, window, opt);
    auto value_at = [&](Vec2 p) {
      const auto i = static_cast<std::size_t>(std::llround(p.x / h) - pts.i0);
      const auto j = static_cast<std::size_t>(std::llround(p.y / h) - pts.j0);
      return f.at(i, j);
    };
    const double f0 = value_at({0.0, 0.0});
    for (std::size_t l = 0; l < lags.size(); ++l) {
      products[t][l] = f0 * value_at(lags[l]);
    }
  });

  std::vector<CovarianceEstimate> out;
  const double n = static_cast<double>(trials);
  for (std::size_t l = 0; l < lags.size(); ++l) {
    double mean = 0.0;
    for (std::size_t t = 0; t < trials; ++t) mean += products[t][l];
    mean /= n;
    double var = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const double d = products[t][l] - mean;
      var += d * d;
    }
    var /= (n - 1.0);
    out.push_back({lags[l], mean, std::sqrt(var / n)});
  }
  return out;
}

}  // namespace shadowperc
