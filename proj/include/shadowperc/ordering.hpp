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

#ifndef SHADOWPERC_ORDERING_HPP_
#define SHADOWPERC_ORDERING_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "shadowperc/common.hpp"
#include "shadowperc/kernel.hpp"

namespace shadowperc {

using Site = std::array<std::int64_t, 2>;

// Dense covariance of X_A = (f(a))_{a in A} over lexicographically sorted
// sites, with its lower Cholesky factor.
struct CovMatrix {
  std::vector<Site> sites;
  std::size_t n = 0;
  std::vector<double> sigma;   // row major n x n
  std::vector<double> factor;  // lower triangular, row major
  std::string kernel_id;

  double at(std::size_t i, std::size_t j) const { return sigma[i * n + j]; }
  std::size_t index_of(const Site& s) const;  // throws if absent
};

// Raised when Cholesky meets a pivot below the floor.
class FactorizationError : public Error {
 public:
  FactorizationError(const std::string& what, double pivot, std::size_t row)
      : Error(what), pivot_(pivot), row_(row) {}
  double pivot() const { return pivot_; }
  std::size_t row() const { return row_; }

 private:
  double pivot_;
  std::size_t row_;
};

inline constexpr double kPivotFloor = 1e-12;

// Sorts the (distinct) sites, fills covariance(k, a_i - a_j)
// and factorizes.
CovMatrix build_covariance(const Kernel& k, std::vector<Site> sites);
// Covariance from an explicit symmetric matrix (sites 0..n-1 on a row).
CovMatrix covariance_from_matrix(std::vector<double> sigma, std::size_t n);
void factorize(CovMatrix& cov);

// Largest off-diagonal absolute row sum; requires a unit diagonal.
double gershgorin_delta(const CovMatrix& cov);
// sqrt((1 + delta) / (1 - delta)) for 0 <= delta < 1.
double c_of_delta(double delta);

// Partition of the site indices 0..n-1 into blocks, each listed in
// increasing index order, with one permutation per block: x ~ sigma when
// sigma(k) is the rank of x_k within the block, rank 1 being the largest.
// The identity therefore means strictly decreasing.
struct OrderingSpec {
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<std::vector<int>> perms;  // values 1..n_i

  std::vector<std::size_t> sizes() const;
  void validate(std::size_t n) const;
  static OrderingSpec identity_blocks(std::vector<std::vector<std::size_t>> blocks);
};

inline constexpr double kTieGap = 1e-15;

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t trials = 0;
  std::int64_t hits = 0;
  std::int64_t ties = 0;  // samples rejected for a gap below kTieGap
};

// Trial t draws X_A = L z with z from RandomStream(seed, t).
McEstimate ordering_probability_mc(const CovMatrix& cov, const OrderingSpec& spec,
                                   std::int64_t trials, std::uint64_t seed,
                                   unsigned workers = 1);

// True when x restricted to every block is strictly ordered per its
// permutation; sets *tie when a compared gap is below kTieGap.
bool follows_ordering(const std::vector<double>& x, const OrderingSpec& spec, bool* tie);

struct OrderingBounds {
  double lower = 0.0;
  double upper = 0.0;
};
// (prod C^-n_i / n_i!, prod C^n_i / n_i!).
OrderingBounds ordering_bounds(const OrderingSpec& spec, double delta);

// Maximal runs of sorted distinct integers whose successive gaps are <= R.
std::vector<std::vector<std::int64_t>> r_connected_decompose(
    const std::vector<std::int64_t>& row, std::int64_t R);

struct PeierlsResult {
  McEstimate mc;
  double delta = 0.0;
  double bound = 0.0;  // prod over row blocks of C(delta)^|B| / |B|!, +inf if delta >= 1
  std::vector<std::vector<Site>> blocks;
  std::int64_t implication_checked = 0;
  std::int64_t implication_violations = 0;
};

// MC estimate of P(alpha_R(u) <= 0 for all u in A) for the lattice field
// X_u = f(u), sampled exactly on A + {0..R} e1 by Cholesky.
PeierlsResult peierls_estimate_mc(const Kernel& k, std::vector<Site> A, std::int64_t R,
                                  std::int64_t trials, std::uint64_t seed,
                                  unsigned workers = 1);

struct PeierlsConstants {
  double rho = 0.0;
  int n0 = 0;            // min{n >= 1 : 2^n / n! <= rho^(2n)}
  std::int64_t R0 = 0;   // ceil(2 / rho^(2 n0))
  double delta0 = 0.0;   // C(delta0)^R0 / R0 = rho^(2 n0), capped below 1/2
};
// Throws BudgetError when R0 does not fit in 2^62.
PeierlsConstants peierls_constants(double rho);

}  // namespace shadowperc

#endif  // SHADOWPERC_ORDERING_HPP_
