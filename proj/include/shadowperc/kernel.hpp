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

#ifndef SHADOWPERC_KERNEL_HPP_
#define SHADOWPERC_KERNEL_HPP_

#include <memory>
#include <string>
#include <vector>

#include "shadowperc/common.hpp"

namespace shadowperc {

enum class KernelKind { BargmannFock, RadialTable };

// Radial profile sampled on 0 = r_0 < r_1 < ... < r_m, interpolated by a
// cubic spline with zero slope at the origin and a natural right end.
// Values vanish beyond r_m.
class RadialTable {
 public:
  RadialTable(std::vector<double> radii, std::vector<double> values);

  double value(double r) const;
  double max_radius() const { return r_.back(); }
  double max_spacing() const { return max_spacing_; }
  const std::vector<double>& radii() const { return r_; }
  const std::vector<double>& values() const { return v_; }

 private:
  std::vector<double> r_;
  std::vector<double> v_;
  std::vector<double> m_;  // spline second derivatives
  double max_spacing_ = 0.0;
};

// A radial kernel q scaled as amplitude * q(length_scale * x). Immutable.
class Kernel {
 public:
  // q(x) = sqrt(2/pi) exp(-|x|^2), whose covariance is exp(-|x|^2 / 2).
  static Kernel bargmann_fock(double decay_beta = 20.0);
  static Kernel radial_table(std::vector<double> radii,
                             std::vector<double> values, double decay_beta,
                             std::string name = "table");
  // Two columns (radius, value) per line; '#' starts a comment.
  static Kernel load_table(const std::string& path, double decay_beta);

  KernelKind kind() const { return kind_; }
  double amplitude() const { return amplitude_; }
  double length_scale() const { return length_; }
  double decay_beta() const { return decay_beta_; }
  // Only the Bargmann-Fock profile has its decay exponent checked.
  bool decay_verified() const { return kind_ == KernelKind::BargmannFock; }
  // Largest table spacing in table radius units; 0 for analytic kinds.
  double table_spacing() const;

  double eval(Vec2 x) const { return eval_radial(norm(x)); }
  double eval_radial(double r) const;
  // d/dr of eval_radial. Analytic for Bargmann-Fock, central differences
  // for tables.
  double radial_derivative(double r) const;
  // Radius beyond which |q| stays below tol.
  double support_radius(double tol) const;

  Kernel with_scales(double amplitude, double length_scale) const;
  std::string id() const;

 private:
  Kernel() = default;

  KernelKind kind_ = KernelKind::BargmannFock;
  double amplitude_ = 1.0;
  double length_ = 1.0;
  double decay_beta_ = 20.0;
  std::string name_ = "bf";
  std::shared_ptr<const RadialTable> table_;
};

// Smooth radial cutoff: 1 on |x| <= 1/4, 0 on |x| >= 1/2, quintic
// smoothstep in between.
double bump_radial(double rho);
double bump_radial_derivative(double rho);
double bump(Vec2 x);
Vec2 bump_gradient(Vec2 x);

// q(x) chi(x / R); R = inf means no truncation. Requires R >= 1.
double eval_truncated(const Kernel& k, double R, Vec2 x);
// d/dr of the truncated radial profile.
double truncated_radial_derivative(const Kernel& k, double R, double r);

struct KernelGradient {
  Vec2 value;
  bool degraded = false;  // table too coarse for reliable differences
};
KernelGradient kernel_gradient(const Kernel& k, Vec2 x, double R = kInf);

// (q * q)(x): closed form for Bargmann-Fock, quadrature otherwise.
double covariance(const Kernel& k, Vec2 x);
// Composite tensor Gauss-Legendre (8 nodes per panel) over the overlap of
// the two kernel supports; panels double until successive estimates differ
// by at most tol * max(1, |estimate|).
double covariance_quadrature(const Kernel& k, Vec2 x, double tol = 1e-8);

struct TailSum {
  double partial = 0.0;        // sum of |cov(u)| over R <= |u|_inf <= cutoff
  double tail_estimate = 0.0;  // decay-based estimate of the rest
  bool tail_reliable = false;  // false when decay_beta <= 4
};
TailSum covariance_tail_sum(const Kernel& k, long R, long cutoff);

// Kernel whose induced field is l1 * f(l2 x); covariance becomes
// l1^2 cov(l2 x).
Kernel rescale(const Kernel& k, double l1, double l2);
// Sets the amplitude so that covariance(0) = 1.
Kernel normalize_variance(const Kernel& k);

struct AssumptionReport {
  bool symmetric = true;  // radial kinds are symmetric by construction
  bool beta_valid = false;
  bool beta_verified = false;
  bool unit_variance = false;
  double variance = 0.0;
  TailSum tail;
  bool tail_below_delta = false;
};
AssumptionReport check_assumptions(const Kernel& k, double delta, long R,
                                   long cutoff);

}  // namespace shadowperc

#endif  // SHADOWPERC_KERNEL_HPP_
