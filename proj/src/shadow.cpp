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

#include "shadowperc/shadow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shadowperc/parallel.hpp"

namespace shadowperc {
namespace {

constexpr std::int64_t kUnlimited = -1;

inline double slope(const double* x, std::int64_t i, std::int64_t k, double step) {
  return (x[i + k] - x[i]) / (static_cast<double>(k) * step);
}

// Max slope over k in [1, K] (or [1, n - 1 - i] when unlimited), ties to
// the smallest k.
void brute_row(const double* x, std::int64_t n, std::int64_t K, double step,
               double* alpha, std::int64_t* kout) {
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t avail = n - 1 - i;
    const bool ok = K == kUnlimited ? avail >= 1 : avail >= K;
    if (!ok) {
      alpha[i] = kNaN;
      kout[i] = 0;
      continue;
    }
    const std::int64_t lim = K == kUnlimited ? avail : K;
    double best = -kInf;
    std::int64_t bk = 0;
    for (std::int64_t k = 1; k <= lim; ++k) {
      const double s = slope(x, i, k, step);
      if (s > best) {
        best = s;
        bk = k;
      }
    }
    alpha[i] = best;
    kout[i] = bk;
  }
}

// Tangent query from point i to an upper hull whose vertices, left to
// right, are vertex(0..m-1), all to the right of i. Slopes from i along the
// hull are unimodal, so a binary search finds the peak; its neighbours are
// rechecked so ties resolve to the leftmost vertex.
template <class Vertex>
std::int64_t tangent(const double* x, std::int64_t i, std::size_t m, double step,
                     Vertex vertex) {
  std::size_t lo = 0, hi = m - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (slope(x, i, vertex(mid + 1) - i, step) > slope(x, i, vertex(mid) - i, step)) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  const std::size_t first = lo > 0 ? lo - 1 : 0;
  const std::size_t last = std::min(m - 1, lo + 1);
  std::int64_t best = vertex(first);
  double best_s = slope(x, i, best - i, step);
  for (std::size_t t = first + 1; t <= last; ++t) {
    const std::int64_t v = vertex(t);
    const double s = slope(x, i, v - i, step);
    if (s > best_s) {
      best_s = s;
      best = v;
    }
  }
  return best;
}

// True when point a lies on or below the chord from l to r (l < a < r).
inline bool not_above(const double* x, std::int64_t l, std::int64_t a, std::int64_t r) {
  return (x[a] - x[l]) * static_cast<double>(r - l) <=
         (x[r] - x[l]) * static_cast<double>(a - l);
}

void hull_row(const double* x, std::int64_t n, std::int64_t K, double step,
              double* alpha, std::int64_t* kout) {
  for (std::int64_t i = 0; i < n; ++i) {
    alpha[i] = kNaN;
    kout[i] = 0;
  }
  std::vector<std::int64_t> suffix;  // leftmost vertex at the back
  std::vector<std::int64_t> prefix;  // leftmost vertex at the front
  auto push_left = [&](std::int64_t p) {
    while (suffix.size() >= 2 &&
           not_above(x, p, suffix.back(), suffix[suffix.size() - 2])) {
      suffix.pop_back();
    }
    suffix.push_back(p);
  };
  auto push_right = [&](std::int64_t p) {
    while (prefix.size() >= 2 &&
           not_above(x, prefix[prefix.size() - 2], prefix.back(), p)) {
      prefix.pop_back();
    }
    prefix.push_back(p);
  };
  auto suffix_vertex = [&](std::size_t t) { return suffix[suffix.size() - 1 - t]; };
  auto prefix_vertex = [&](std::size_t t) { return prefix[t]; };

  if (K == kUnlimited) {
    for (std::int64_t i = n - 1; i >= 0; --i) {
      if (!suffix.empty()) {
        const std::int64_t v = tangent(x, i, suffix.size(), step, suffix_vertex);
        alpha[i] = slope(x, i, v - i, step);
        kout[i] = v - i;
      }
      push_left(i);
    }
    return;
  }

  // Candidates of site i in block [s, e) are the block suffix (i, e) and the
  // prefix [e, i + K] of the next block.
  for (std::int64_t s = 0; s < n; s += K) {
    const std::int64_t e = std::min(s + K, n);
    suffix.clear();
    for (std::int64_t i = e - 1; i >= s; --i) {
      if (i + K <= n - 1 && !suffix.empty()) {
        const std::int64_t v = tangent(x, i, suffix.size(), step, suffix_vertex);
        alpha[i] = slope(x, i, v - i, step);
        kout[i] = v - i;
      }
      push_left(i);
    }
    prefix.clear();
    std::int64_t next = e;
    for (std::int64_t i = s; i < e; ++i) {
      if (i + K > n - 1) break;
      while (next <= i + K) push_right(next++);
      const std::int64_t v = tangent(x, i, prefix.size(), step, prefix_vertex);
      const double sv = slope(x, i, v - i, step);
      if (kout[i] == 0 || sv > alpha[i]) {
        alpha[i] = sv;
        kout[i] = v - i;
      }
    }
  }
}

void run_row(ShadowMethod method, const double* x, std::int64_t n, std::int64_t K,
             double step, double* alpha, std::int64_t* kout) {
  if (method == ShadowMethod::Hull) {
    hull_row(x, n, K, step, alpha, kout);
  } else {
    brute_row(x, n, K, step, alpha, kout);
  }
}

std::int64_t horizon_steps(std::optional<std::int64_t> R) {
  if (!R) return kUnlimited;
  if (*R < 1) throw Error("discrete horizon must be at least 1");
  return *R;
}

ShadowField discrete_impl(std::span<const double> values, const GridGeometry& geom,
                          std::optional<std::int64_t> R, ShadowMethod method,
                          std::string source) {
  if (values.size() != geom.size()) throw Error("grid size does not match dimensions");
  const std::int64_t K = horizon_steps(R);
  ShadowField out;
  out.geometry = geom;
  out.variant = ShadowVariant::Discrete;
  out.horizon = R ? static_cast<double>(*R) : kInf;
  out.source = std::move(source);
  out.alpha.assign(geom.size(), kNaN);
  out.r.assign(geom.size(), kNaN);
  out.valid.assign(geom.size(), 0);
  const auto nx = static_cast<std::int64_t>(geom.nx);
  std::vector<std::int64_t> k(geom.nx);
  for (std::size_t j = 0; j < geom.ny; ++j) {
    const std::size_t base = j * geom.nx;
    run_row(method, values.data() + base, nx, K, 1.0, out.alpha.data() + base, k.data());
    for (std::size_t i = 0; i < geom.nx; ++i) {
      if (k[i] > 0) {
        out.valid[base + i] = 1;
        out.r[base + i] = static_cast<double>(k[i]);
      }
    }
  }
  return out;
}

}  // namespace

const char* to_string(ShadowVariant v) {
  return v == ShadowVariant::Continuous ? "continuous" : "discrete";
}

std::size_t ShadowField::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1));
}

double tau(const FieldGrid& field, const FieldGrid* gradient, std::size_t i,
           std::size_t j, double r) {
  const GridGeometry& g = field.geometry;
  if (!(r >= 0.0)) throw Error("tau needs r >= 0");
  if (i >= g.nx || j >= g.ny) throw Error("tau: point outside the field window");
  if (r == 0.0) {
    if (gradient == nullptr) throw Error("tau at r = 0 needs the gradient grid");
    if (!(gradient->geometry == g)) throw Error("tau: gradient lattice differs from field");
    return gradient->at(i, j);
  }
  const double steps = r / g.h;
  const auto k = static_cast<std::size_t>(std::llround(steps));
  if (std::abs(steps - static_cast<double>(k)) > 1e-9 * std::max(1.0, steps)) {
    throw Error("tau: r is not a multiple of the grid spacing");
  }
  if (i + k >= g.nx) throw Error("tau: z + r e1 lies outside the field window");
  return (field.at(i + k, j) - field.at(i, j)) / r;
}

ShadowField shadow_discrete(std::span<const double> values, std::size_t nx,
                            std::size_t ny, std::optional<std::int64_t> R,
                            ShadowMethod method) {
  GridGeometry g{{0.0, 0.0}, 1.0, nx, ny};
  return discrete_impl(values, g, R, method, "grid");
}

ShadowField shadow_discrete(const FieldGrid& X, std::optional<std::int64_t> R,
                            ShadowMethod method) {
  return discrete_impl(X.values, X.geometry, R, method, X.kernel_id);
}

ShadowField shadow_continuous(const FieldGrid& field, const FieldGrid& gradient,
                              double R, ShadowMethod method) {
  const GridGeometry& g = field.geometry;
  if (!(gradient.geometry == g)) {
    throw Error("shadow_continuous: field and gradient lattices differ");
  }
  if (!(R >= 0.0) || std::isinf(R)) throw Error("continuous horizon must be finite and >= 0");
  const double steps = R / g.h;
  const auto K = static_cast<std::int64_t>(std::floor(steps + 1e-9));
  ShadowField out;
  out.geometry = g;
  out.variant = ShadowVariant::Continuous;
  out.horizon = R;
  out.source = field.kernel_id;
  out.alpha.assign(g.size(), kNaN);
  out.r.assign(g.size(), kNaN);
  out.valid.assign(g.size(), 0);
  const auto nx = static_cast<std::int64_t>(g.nx);
  std::vector<double> a(g.nx);
  std::vector<std::int64_t> k(g.nx);
  for (std::size_t j = 0; j < g.ny; ++j) {
    const std::size_t base = j * g.nx;
    if (K >= 1) {
      run_row(method, field.values.data() + base, nx, K, g.h, a.data(), k.data());
    }
    for (std::size_t i = 0; i < g.nx; ++i) {
      if (static_cast<std::int64_t>(i) + K > nx - 1) continue;
      const double grad = gradient.values[base + i];
      double best = grad;
      double best_r = 0.0;
      if (K >= 1 && a[i] > grad) {
        best = a[i];
        best_r = static_cast<double>(k[i]) * g.h;
      }
      out.alpha[base + i] = best;
      out.r[base + i] = best_r;
      out.valid[base + i] = 1;
    }
  }
  return out;
}

RowShadow shadow_fast_row(std::span<const double> row, std::optional<std::int64_t> R) {
  RowShadow out;
  out.alpha.resize(row.size());
  out.r.resize(row.size());
  hull_row(row.data(), static_cast<std::int64_t>(row.size()), horizon_steps(R), 1.0,
           out.alpha.data(), out.r.data());
  return out;
}

RowShadow shadow_brute_row(std::span<const double> row, std::optional<std::int64_t> R) {
  RowShadow out;
  out.alpha.resize(row.size());
  out.r.resize(row.size());
  brute_row(row.data(), static_cast<std::int64_t>(row.size()), horizon_steps(R), 1.0,
            out.alpha.data(), out.r.data());
  return out;
}

std::vector<GridRecord> to_records(const ShadowField& s) {
  GridRecord a;
  a.header.kind = GridKind::Shadow;
  a.header.geometry = s.geometry;
  a.header.horizon = s.horizon;
  a.header.variant = s.variant == ShadowVariant::Continuous ? 1 : 2;
  a.values = s.alpha;
  GridRecord r = a;
  r.header.kind = GridKind::Argmax;
  r.values = s.r;
  return {a, r};
}

ShadowField shadow_from_records(const std::vector<GridRecord>& recs) {
  if (recs.empty() || recs[0].header.kind != GridKind::Shadow) {
    throw Error("grid file does not start with a shadow record");
  }
  ShadowField s;
  const GridHeader& h = recs[0].header;
  s.geometry = h.geometry;
  s.alpha = recs[0].values;
  s.horizon = h.horizon;
  s.variant = h.variant == 1 ? ShadowVariant::Continuous : ShadowVariant::Discrete;
  s.source = "file";
  s.valid.resize(s.alpha.size());
  for (std::size_t i = 0; i < s.alpha.size(); ++i) s.valid[i] = !std::isnan(s.alpha[i]);
  if (recs.size() > 1 && recs[1].header.kind == GridKind::Argmax) {
    s.r = recs[1].values;
  } else {
    s.r.assign(s.alpha.size(), kNaN);
  }
  return s;
}

ShadowField alpha_on_window(const NoisePatch& noise, const Kernel& k,
                            const Rect& window, HorizonKernelPair pair,
                            unsigned workers) {
  const Rect ext{window.x0, window.y0, window.x1 + pair.horizon, window.y1};
  FieldOptions opt;
  opt.truncation = pair.truncation;
  opt.workers = workers;
  const FieldGrid f = convolve_field(noise, k, ext, opt);
  opt.derivative = Derivative::E1;
  const FieldGrid g = convolve_field(noise, k, ext, opt);
  const ShadowField full = shadow_continuous(f, g, pair.horizon);
  const LatticeBox pts = output_points(window, noise.h(), 1);
  ShadowField out;
  out.geometry = full.geometry;
  out.geometry.nx = static_cast<std::size_t>(pts.nx);
  out.variant = full.variant;
  out.horizon = full.horizon;
  out.source = full.source;
  for (std::size_t j = 0; j < out.geometry.ny; ++j) {
    for (std::size_t i = 0; i < out.geometry.nx; ++i) {
      const std::size_t src = full.geometry.index(i, j);
      out.alpha.push_back(full.alpha[src]);
      out.r.push_back(full.r[src]);
      out.valid.push_back(full.valid[src]);
    }
  }
  return out;
}

Rect truncation_noise_region(const Kernel& k, double h, const Rect& window,
                             const std::vector<HorizonKernelPair>& pairs) {
  Rect region{kInf, kInf, -kInf, -kInf};
  for (const auto& p : pairs) {
    const Rect ext{window.x0, window.y0, window.x1 + p.horizon, window.y1};
    for (Derivative d : {Derivative::None, Derivative::E1}) {
      FieldOptions opt;
      opt.truncation = p.truncation;
      opt.derivative = d;
      const Rect r = required_noise_region(k, h, ext, opt);
      region.x0 = std::min(region.x0, r.x0);
      region.y0 = std::min(region.y0, r.y0);
      region.x1 = std::max(region.x1, r.x1);
      region.y1 = std::max(region.y1, r.y1);
    }
  }
  return region;
}

std::vector<TruncationErrorRow> truncation_error(
    const NoisePatch& noise, const Kernel& k,
    const std::vector<HorizonKernelPair>& pairs, HorizonKernelPair reference,
    const Rect& window, unsigned workers) {
  const ShadowField ref = alpha_on_window(noise, k, window, reference, workers);
  std::vector<TruncationErrorRow> rows;
  for (const auto& p : pairs) {
    TruncationErrorRow row{p, 0.0};
    if (p.horizon == reference.horizon && p.truncation == reference.truncation) {
      rows.push_back(row);
      continue;
    }
    const ShadowField a = alpha_on_window(noise, k, window, p, workers);
    for (std::size_t t = 0; t < a.alpha.size(); ++t) {
      row.sup_error = std::max(row.sup_error, std::abs(a.alpha[t] - ref.alpha[t]));
    }
    rows.push_back(row);
  }
  return rows;
}

SeedLevelResult seed_level_estimate(const Kernel& k, double lambda,
                                    std::size_t trials, double p, double h,
                                    std::uint64_t seed, unsigned workers) {
  if (trials < 100) throw Error("seed_level_estimate needs at least 100 trials");
  if (!(p >= 0.0 && p <= 1.0)) throw Error("confidence target must lie in [0, 1]");
  if (!(lambda >= 1.0)) throw Error("lambda must be at least 1");
  SeedLevelResult res;
  if (p == 0.0) {
    res.level = -kInf;
    res.coverage = 1.0;
    res.coverage_lower95 = 1.0;
    res.note = "p = 0 imposes no constraint";
    return res;
  }
  const Rect box{0.0, 0.0, lambda, lambda};
  const HorizonKernelPair pair{lambda, lambda};
  const Rect region = truncation_noise_region(k, h, box, {pair});
  res.sups.assign(trials, -kInf);
  parallel_for(trials, workers, [&](std::size_t t) {
    const NoisePatch noise = sample_noise(region, h, seed, t);
    const ShadowField a = alpha_on_window(noise, k, box, pair);
    double sup = -kInf;
    for (double v : a.alpha) sup = std::max(sup, v);
    res.sups[t] = sup;
  });
  std::vector<double> sorted = res.sups;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(trials);
  const auto idx = static_cast<std::size_t>(std::max(1.0, std::ceil(p * n)) - 1.0);
  res.level = sorted[idx];
  const auto hits = static_cast<double>(
      std::upper_bound(sorted.begin(), sorted.end(), res.level) - sorted.begin());
  res.coverage = hits / n;
  // One-sided 95% Wilson lower bound for the true coverage.
  const double z = 1.6448536269514722;
  const double ph = res.coverage;
  const double centre = ph + z * z / (2 * n);
  const double spread = z * std::sqrt(ph * (1 - ph) / n + z * z / (4 * n * n));
  res.coverage_lower95 = (centre - spread) / (1 + z * z / n);
  std::ostringstream os;
  os << "empirical coverage " << res.coverage << " over " << trials
     << " trials; one-sided 95% lower bound " << res.coverage_lower95;
  res.note = os.str();
  return res;
}

}  // namespace shadowperc
