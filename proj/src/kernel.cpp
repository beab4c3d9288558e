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

#include "shadowperc/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace shadowperc {
namespace {

const double kBfPrefactor = std::sqrt(2.0 / std::numbers::pi);

constexpr std::array<double, 8> kGlNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
    0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double gl_integrate(const Kernel& k, Vec2 x, double ax, double bx, double ay,
                    double by, int panels) {
  const double hx = (bx - ax) / panels;
  const double hy = (by - ay) / panels;
  std::vector<double> ys;
  std::vector<double> wy;
  ys.reserve(static_cast<std::size_t>(panels) * 8);
  for (int p = 0; p < panels; ++p) {
    const double c = ay + (p + 0.5) * hy;
    for (std::size_t g = 0; g < 8; ++g) {
      ys.push_back(c + 0.5 * hy * kGlNodes[g]);
      wy.push_back(0.5 * hy * kGlWeights[g]);
    }
  }
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double c = ax + (p + 0.5) * hx;
    for (std::size_t g = 0; g < 8; ++g) {
      const double yx = c + 0.5 * hx * kGlNodes[g];
      const double w = 0.5 * hx * kGlWeights[g];
      double row = 0.0;
      for (std::size_t t = 0; t < ys.size(); ++t) {
        const Vec2 y{yx, ys[t]};
        row += wy[t] * k.eval(y) * k.eval(x - y);
      }
      total += w * row;
    }
  }
  return total;
}

}  // namespace

RadialTable::RadialTable(std::vector<double> radii, std::vector<double> values)
    : r_(std::move(radii)), v_(std::move(values)) {
  const std::size_t n = r_.size();
  if (n < 2 || v_.size() != n) {
    throw Error("radial table needs at least two (radius, value) pairs");
  }
  if (r_[0] != 0.0) throw Error("radial table must start at radius 0");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(r_[i]) || !std::isfinite(v_[i])) {
      throw Error("radial table entries must be finite");
    }
    if (i > 0) {
      if (!(r_[i] > r_[i - 1])) {
        throw Error("radial table radii must be strictly increasing");
      }
      max_spacing_ = std::max(max_spacing_, r_[i] - r_[i - 1]);
    }
  }
  // Tridiagonal system for the spline second derivatives: zero slope at
  // r = 0, natural (M = 0) at the last radius.
  const std::size_t m = n - 1;
  std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
  const double h0 = r_[1] - r_[0];
  b[0] = 2.0 * h0;
  c[0] = h0;
  d[0] = 6.0 * (v_[1] - v_[0]) / h0;
  for (std::size_t i = 1; i < m; ++i) {
    const double hl = r_[i] - r_[i - 1];
    const double hr = r_[i + 1] - r_[i];
    a[i] = hl;
    b[i] = 2.0 * (hl + hr);
    c[i] = hr;
    d[i] = 6.0 * ((v_[i + 1] - v_[i]) / hr - (v_[i] - v_[i - 1]) / hl);
  }
  b[m] = 1.0;
  d[m] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  m_.assign(n, 0.0);
  m_[m] = d[m] / b[m];
  for (std::size_t i = m; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
}

double RadialTable::value(double r) const {
  r = std::abs(r);
  if (r > r_.back()) return 0.0;
  const auto it = std::upper_bound(r_.begin(), r_.end(), r);
  std::size_t i = static_cast<std::size_t>(it - r_.begin());
  i = std::clamp<std::size_t>(i, 1, r_.size() - 1) - 1;
  const double h = r_[i + 1] - r_[i];
  const double A = (r_[i + 1] - r) / h;
  const double B = (r - r_[i]) / h;
  return A * v_[i] + B * v_[i + 1] +
         ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
}

Kernel Kernel::bargmann_fock(double decay_beta) {
  if (!(decay_beta > 1.0)) throw Error("decay_beta must exceed 1");
  Kernel k;
  k.kind_ = KernelKind::BargmannFock;
  k.decay_beta_ = decay_beta;
  k.name_ = "bf";
  return k;
}

Kernel Kernel::radial_table(std::vector<double> radii,
                            std::vector<double> values, double decay_beta,
                            std::string name) {
  if (!(decay_beta > 1.0)) throw Error("decay_beta must exceed 1");
  Kernel k;
  k.kind_ = KernelKind::RadialTable;
  k.decay_beta_ = decay_beta;
  k.name_ = std::move(name);
  k.table_ = std::make_shared<RadialTable>(std::move(radii), std::move(values));
  return k;
}

Kernel Kernel::load_table(const std::string& path, double decay_beta) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open kernel table: " + path);
  std::vector<double> r, v;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double a = 0.0, b = 0.0;
    if (!(ls >> a)) continue;
    if (!(ls >> b)) throw Error("kernel table line lacks a value: " + line);
    r.push_back(a);
    v.push_back(b);
  }
  return radial_table(std::move(r), std::move(v), decay_beta, "table:" + path);
}

double Kernel::table_spacing() const {
  return table_ ? table_->max_spacing() : 0.0;
}

double Kernel::eval_radial(double r) const {
  const double s = length_ * r;
  if (kind_ == KernelKind::BargmannFock) {
    return amplitude_ * kBfPrefactor * std::exp(-s * s);
  }
  return amplitude_ * table_->value(s);
}

double Kernel::radial_derivative(double r) const {
  if (kind_ == KernelKind::BargmannFock) {
    const double s = length_ * r;
    return -2.0 * length_ * s * amplitude_ * kBfPrefactor * std::exp(-s * s);
  }
  const double eta = 1e-5 * std::max(1.0, std::abs(r)) / length_;
  return (eval_radial(r + eta) - eval_radial(std::abs(r - eta))) / (2.0 * eta);
}

double Kernel::support_radius(double tol) const {
  if (kind_ == KernelKind::BargmannFock) {
    const double peak = amplitude_ * kBfPrefactor;
    if (peak <= tol) return 0.0;
    return std::sqrt(std::log(peak / tol)) / length_;
  }
  const auto& r = table_->radii();
  const auto& v = table_->values();
  for (std::size_t i = r.size(); i-- > 0;) {
    if (std::abs(amplitude_ * v[i]) >= tol) {
      return std::min(r.back(), r[std::min(i + 1, r.size() - 1)]) / length_;
    }
  }
  return 0.0;
}

Kernel Kernel::with_scales(double amplitude, double length_scale) const {
  if (!(amplitude > 0.0) || !(length_scale > 0.0)) {
    throw Error("kernel scales must be positive");
  }
  Kernel k = *this;
  k.amplitude_ = amplitude;
  k.length_ = length_scale;
  return k;
}

std::string Kernel::id() const {
  return name_ + "(amp=" + format_double(amplitude_) +
         ",len=" + format_double(length_) +
         ",beta=" + format_double(decay_beta_) + ")";
}

double bump_radial(double rho) {
  const double t = std::clamp((0.5 - std::abs(rho)) / 0.25, 0.0, 1.0);
  return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

double bump_radial_derivative(double rho) {
  const double t = (0.5 - std::abs(rho)) / 0.25;
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return -4.0 * 30.0 * t * t * (t - 1.0) * (t - 1.0);
}

double bump(Vec2 x) { return bump_radial(norm(x)); }

Vec2 bump_gradient(Vec2 x) {
  const double r = norm(x);
  if (r == 0.0) return {};
  return (bump_radial_derivative(r) / r) * x;
}

double eval_truncated(const Kernel& k, double R, Vec2 x) {
  if (!(R >= 1.0)) throw Error("truncation radius must be at least 1");
  if (std::isinf(R)) return k.eval(x);
  const double r = norm(x);
  if (r >= 0.5 * R) return 0.0;
  return k.eval_radial(r) * bump_radial(r / R);
}

double truncated_radial_derivative(const Kernel& k, double R, double r) {
  if (!(R >= 1.0)) throw Error("truncation radius must be at least 1");
  if (std::isinf(R)) return k.radial_derivative(r);
  if (r >= 0.5 * R) return 0.0;
  return k.radial_derivative(r) * bump_radial(r / R) +
         k.eval_radial(r) * bump_radial_derivative(r / R) / R;
}

KernelGradient kernel_gradient(const Kernel& k, Vec2 x, double R) {
  KernelGradient g;
  g.degraded = k.kind() == KernelKind::RadialTable && k.table_spacing() > 0.1;
  const double r = norm(x);
  if (r == 0.0) return g;
  g.value = (truncated_radial_derivative(k, R, r) / r) * x;
  return g;
}

double covariance(const Kernel& k, Vec2 x) {
  if (k.kind() == KernelKind::BargmannFock) {
    const double a = k.amplitude();
    const double l = k.length_scale();
    return a * a / (l * l) * std::exp(-0.5 * l * l * norm2(x));
  }
  return covariance_quadrature(k, x);
}

double covariance_quadrature(const Kernel& k, Vec2 x, double tol) {
  // x and -x give the same integral; fold to keep the result exactly even.
  if (x.x < 0.0 || (x.x == 0.0 && x.y < 0.0)) x = -x;
  const double s = k.kind() == KernelKind::BargmannFock
                       ? k.support_radius(1e-18)
                       : k.support_radius(0.0);
  const double ax = std::max(-s, x.x - s), bx = std::min(s, x.x + s);
  const double ay = std::max(-s, x.y - s), by = std::min(s, x.y + s);
  if (!(bx > ax) || !(by > ay)) return 0.0;
  double prev = gl_integrate(k, x, ax, bx, ay, by, 4);
  for (int panels = 8; panels <= 512; panels *= 2) {
    const double cur = gl_integrate(k, x, ax, bx, ay, by, panels);
    if (std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur))) return cur;
    prev = cur;
  }
  throw Error("covariance quadrature did not converge");
}

TailSum covariance_tail_sum(const Kernel& k, long R, long cutoff) {
  if (R < 0 || cutoff < 0 || R > cutoff + 1) {
    throw Error("covariance_tail_sum needs 0 <= R <= cutoff + 1");
  }
  TailSum out;
  std::map<long, double> cache;  // radial kernels: cov depends on |u|^2
  auto cov_at = [&](long a, long b) {
    const long key = a * a + b * b;
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double c = std::abs(covariance(k, {double(a), double(b)}));
    cache.emplace(key, c);
    return c;
  };
  double shell_max = 0.0;
  for (long a = -cutoff; a <= cutoff; ++a) {
    for (long b = -cutoff; b <= cutoff; ++b) {
      const long m = std::max(std::abs(a), std::abs(b));
      if (m < R) continue;
      const double c = cov_at(a, b);
      out.partial += c;
      if (m == cutoff) shell_max = std::max(shell_max, c);
    }
  }
  // Model |cov(u)| <= c |u|_inf^(2 - beta) fitted on the outer shell; the
  // remaining shells then sum to about 8 c cutoff^(4 - beta) / (beta - 4).
  const double beta = k.decay_beta();
  out.tail_reliable = beta > 4.0 && cutoff >= 1;
  if (out.tail_reliable) {
    const double n = static_cast<double>(cutoff);
    const double c = shell_max * std::pow(n, beta - 2.0);
    out.tail_estimate = 8.0 * c * std::pow(n, 4.0 - beta) / (beta - 4.0);
  } else {
    out.tail_estimate = kInf;
  }
  return out;
}

Kernel rescale(const Kernel& k, double l1, double l2) {
  if (!(l1 > 0.0) || !(l2 > 0.0)) throw Error("rescale factors must be positive");
  if (l1 == 1.0 && l2 == 1.0) return k;
  return k.with_scales(k.amplitude() * l1 * l2, k.length_scale() * l2);
}

Kernel normalize_variance(const Kernel& k) {
  const double v = covariance(k, {0.0, 0.0});
  if (!(v > 0.0)) throw Error("kernel has zero variance");
  return k.with_scales(k.amplitude() / std::sqrt(v), k.length_scale());
}

AssumptionReport check_assumptions(const Kernel& k, double delta, long R,
                                   long cutoff) {
  AssumptionReport rep;
  rep.beta_valid = k.decay_beta() > 1.0;
  rep.beta_verified = k.decay_verified();
  rep.variance = covariance(k, {0.0, 0.0});
  rep.unit_variance = std::abs(rep.variance - 1.0) <= 1e-8;
  rep.tail = covariance_tail_sum(k, R, cutoff);
  rep.tail_below_delta =
      rep.tail.tail_reliable && rep.tail.partial + rep.tail.tail_estimate < delta;
  return rep;
}

}  // namespace shadowperc
