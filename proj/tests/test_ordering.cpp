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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "shadowperc/ordering.hpp"

using namespace shadowperc;

namespace {

CovMatrix identity(std::size_t n) {
  std::vector<double> s(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) s[i * n + i] = 1.0;
  return covariance_from_matrix(s, n);
}

std::vector<Site> row_sites(std::int64_t count, std::int64_t spacing) {
  std::vector<Site> s;
  for (std::int64_t k = 0; k < count; ++k) s.push_back({k * spacing, 0});
  return s;
}

}  // namespace

TEST_CASE("covariance matrices from the kernel") {
  const Kernel k = Kernel::bargmann_fock();
  const CovMatrix one = build_covariance(k, {{3, 4}});
  CHECK(one.n == 1);
  CHECK(one.at(0, 0) == doctest::Approx(1.0).epsilon(1e-14));

  const CovMatrix pair = build_covariance(k, {{1, 0}, {0, 0}});
  CHECK(pair.sites[0] == Site{0, 0});
  CHECK(pair.at(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(pair.at(1, 0) == pair.at(0, 1));
  CHECK(pair.index_of({1, 0}) == 1);
  CHECK_THROWS_AS(pair.index_of({2, 0}), Error);

  const CovMatrix far = build_covariance(k, {{0, 0}, {10, 0}});
  CHECK(std::abs(far.at(0, 1)) < 1e-20);

  // L L^T reproduces the matrix.
  const CovMatrix m = build_covariance(k, {{0, 0}, {1, 0}, {0, 1}, {2, 1}, {1, 2}});
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < m.n; ++t) s += m.factor[i * m.n + t] * m.factor[j * m.n + t];
      CHECK(s == doctest::Approx(m.at(i, j)).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(build_covariance(k, {}), Error);
  CHECK_THROWS_AS(build_covariance(k, {{0, 0}, {0, 0}}), Error);
  // Exactly singular: the pivot floor rejects it.
  CHECK_THROWS_AS(covariance_from_matrix({1, 1, 1, 1}, 2), FactorizationError);
  try {
    covariance_from_matrix({1, 0.5, 0, 0.5, 1, 1, 0, 1, 1}, 3);
    FAIL("expected a factorization error");
  } catch (const FactorizationError& e) {
    CHECK(e.row() == 2);
    CHECK(e.pivot() < kPivotFloor);
  }
  CHECK_THROWS_AS(covariance_from_matrix({1, 0.2, 0.3, 1}, 2), Error);
}

TEST_CASE("Gershgorin delta") {
  CHECK(gershgorin_delta(identity(5)) == 0.0);
  const CovMatrix two = covariance_from_matrix({1, -0.3, -0.3, 1}, 2);
  CHECK(gershgorin_delta(two) == doctest::Approx(0.3));
  Eigen::Matrix2d m;
  m << 1, -0.3, -0.3, 1;
  const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(m).eigenvalues();
  CHECK(ev(0) == doctest::Approx(0.7));
  CHECK(ev(1) == doctest::Approx(1.3));

  const Kernel k = Kernel::bargmann_fock();
  const CovMatrix row = build_covariance(k, row_sites(3, 1));
  // The middle row carries the largest off-diagonal sum.
  CHECK(row.at(0, 1) + row.at(0, 2) == doctest::Approx(std::exp(-0.5) + std::exp(-2.0)).epsilon(1e-13));
  CHECK(gershgorin_delta(row) == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-13));

  CHECK_THROWS_AS(gershgorin_delta(covariance_from_matrix({2, 0, 0, 1}, 2)), Error);
}

TEST_CASE("Gershgorin interval contains every eigenvalue") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> U(0.4, 2.0);
  for (int t = 0; t < 50; ++t) {
    const Kernel k = normalize_variance(rescale(Kernel::bargmann_fock(), 1.0, U(rng)));
    std::set<Site> chosen;
    const std::size_t n = 2 + rng() % 9;
    while (chosen.size() < n) {
      chosen.insert({static_cast<std::int64_t>(rng() % 8), static_cast<std::int64_t>(rng() % 8)});
    }
    CovMatrix cov;
    try {
      cov = build_covariance(k, std::vector<Site>(chosen.begin(), chosen.end()));
    } catch (const FactorizationError&) {
      continue;  // nearly singular draws carry no certificate to test
    }
    const double delta = gershgorin_delta(cov);
    Eigen::MatrixXd M(cov.n, cov.n);
    for (std::size_t i = 0; i < cov.n; ++i) {
      for (std::size_t j = 0; j < cov.n; ++j) M(i, j) = cov.at(i, j);
    }
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      CHECK(ev(i) >= 1.0 - delta - 1e-12);
      CHECK(ev(i) <= 1.0 + delta + 1e-12);
    }
  }
}

TEST_CASE("C(delta) and the ordering bounds") {
  CHECK(c_of_delta(0.0) == 1.0);
  CHECK(c_of_delta(0.6) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(c_of_delta(0.999) > 44.0);
  CHECK_THROWS_AS(c_of_delta(1.0), Error);
  CHECK_THROWS_AS(c_of_delta(-0.1), Error);

  const OrderingSpec three = OrderingSpec::identity_blocks({{0, 1, 2}});
  const OrderingBounds b = ordering_bounds(three, 0.6);
  CHECK(b.lower == doctest::Approx(1.0 / 48.0).epsilon(1e-14));
  CHECK(b.upper == doctest::Approx(8.0 / 6.0).epsilon(1e-14));

  const OrderingSpec split = OrderingSpec::identity_blocks({{0, 2}, {1, 3, 4}});
  const OrderingBounds z = ordering_bounds(split, 0.0);
  CHECK(z.lower == doctest::Approx(1.0 / 12.0));
  CHECK(z.upper == z.lower);
  for (double d : {0.01, 0.2, 0.5, 0.9}) {
    const OrderingBounds o = ordering_bounds(split, d);
    CHECK(o.upper >= o.lower);
  }
}

TEST_CASE("ordering spec validation and ranks") {
  OrderingSpec s;
  s.blocks = {{0, 2}, {1}};
  s.perms = {{2, 1}, {1}};
  CHECK_NOTHROW(s.validate(3));
  CHECK(s.sizes() == std::vector<std::size_t>{2, 1});
  CHECK_THROWS_AS(s.validate(4), Error);
  OrderingSpec dup = s;
  dup.blocks = {{0, 1}, {1}};
  CHECK_THROWS_AS(dup.validate(3), Error);
  OrderingSpec notperm = s;
  notperm.perms = {{1, 1}, {1}};
  CHECK_THROWS_AS(notperm.validate(3), Error);

  // perm {2, 1}: site 0 ranks second, so x_2 > x_0.
  bool tie = false;
  CHECK(follows_ordering({0.0, 5.0, 1.0}, s, &tie));
  CHECK_FALSE(follows_ordering({1.0, 5.0, 0.0}, s, &tie));
  CHECK_FALSE(tie);
  CHECK_FALSE(follows_ordering({1.0, 5.0, 1.0}, s, &tie));
  CHECK(tie);
}

TEST_CASE("ordering probabilities under exchangeability") {
  const CovMatrix I4 = identity(4);
  OrderingSpec s;
  s.blocks = {{0, 1, 2, 3}};
  s.perms = {{3, 1, 4, 2}};
  const McEstimate e = ordering_probability_mc(I4, s, 200000, 7);
  CHECK(e.trials == 200000);
  CHECK(e.ties == 0);
  CHECK(std::abs(e.estimate - 1.0 / 24.0) <= 4.0 * e.std_error);

  const OrderingSpec two = OrderingSpec::identity_blocks({{0, 2}, {1, 3}});
  const McEstimate t = ordering_probability_mc(I4, two, 100000, 8);
  CHECK(std::abs(t.estimate - 0.25) <= 4.0 * t.std_error);

  // Worker count does not change the result.
  const McEstimate w = ordering_probability_mc(I4, s, 20000, 9, 1);
  const McEstimate w3 = ordering_probability_mc(I4, s, 20000, 9, 3);
  CHECK(w.hits == w3.hits);
  CHECK_THROWS_AS(ordering_probability_mc(I4, s, 999, 1), Error);
}

TEST_CASE("ordering probabilities sum to one over permutations") {
  const Kernel k = Kernel::bargmann_fock();
  const CovMatrix cov = build_covariance(k, row_sites(3, 1));
  std::vector<int> perm{1, 2, 3};
  std::int64_t total = 0, ties = 0;
  const std::int64_t trials = 20000;
  do {
    OrderingSpec s;
    s.blocks = {{0, 1, 2}};
    s.perms = {perm};
    const McEstimate e = ordering_probability_mc(cov, s, trials, 11);
    total += e.hits;
    ties += e.ties;
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(total + ties / 2 <= trials);
  CHECK(total >= trials - ties);
}

TEST_CASE("correlated ordering inside the sandwich") {
  const Kernel k = Kernel::bargmann_fock();
  for (std::int64_t spacing : {1, 2, 4}) {
    const CovMatrix cov = build_covariance(k, row_sites(3, spacing));
    const double delta = gershgorin_delta(cov);
    if (delta >= 1.0) continue;
    const OrderingSpec s = OrderingSpec::identity_blocks({{0, 1, 2}});
    const OrderingBounds b = ordering_bounds(s, delta);
    const McEstimate e = ordering_probability_mc(cov, s, 100000, 12);
    CHECK(e.estimate >= b.lower - 3.0 * e.std_error);
    CHECK(e.estimate <= b.upper + 3.0 * e.std_error);
  }
}

TEST_CASE("R-connected decomposition") {
  using V = std::vector<std::vector<std::int64_t>>;
  CHECK(r_connected_decompose({0, 1, 2}, 1) == V{{0, 1, 2}});
  CHECK(r_connected_decompose({0, 5}, 1) == V{{0}, {5}});
  CHECK(r_connected_decompose({0, 2, 4, 9, 11}, 2) == V{{0, 2, 4}, {9, 11}});
  CHECK(r_connected_decompose({}, 3).empty());
  CHECK_THROWS_AS(r_connected_decompose({2, 1}, 1), Error);
  CHECK_THROWS_AS(r_connected_decompose({1, 1}, 1), Error);
  CHECK_THROWS_AS(r_connected_decompose({1}, 0), Error);

  std::mt19937_64 rng(43);
  for (int t = 0; t < 200; ++t) {
    std::set<std::int64_t> pts;
    const std::size_t n = 1 + rng() % 20;
    while (pts.size() < n) pts.insert(static_cast<std::int64_t>(rng() % 60));
    const std::vector<std::int64_t> row(pts.begin(), pts.end());
    const std::int64_t R = 1 + static_cast<std::int64_t>(rng() % 6);
    const V blocks = r_connected_decompose(row, R);
    std::vector<std::int64_t> flat;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (std::size_t i = 1; i < blocks[b].size(); ++i) CHECK(blocks[b][i] - blocks[b][i - 1] <= R);
      if (b > 0) CHECK(blocks[b].front() - blocks[b - 1].back() > R);
      flat.insert(flat.end(), blocks[b].begin(), blocks[b].end());
    }
    CHECK(flat == row);
  }
}

TEST_CASE("Peierls estimates") {
  const Kernel k = Kernel::bargmann_fock();
  const PeierlsResult one = peierls_estimate_mc(k, {{0, 0}}, 1, 40000, 3);
  CHECK(std::abs(one.mc.estimate - 0.5) <= 4.0 * one.mc.std_error);
  CHECK(one.delta == 0.0);
  CHECK(one.bound == doctest::Approx(1.0));

  const PeierlsResult pair = peierls_estimate_mc(k, {{0, 0}, {40, 0}}, 1, 40000, 4);
  CHECK(std::abs(pair.mc.estimate - 0.25) <= 4.0 * pair.mc.std_error);
  CHECK(pair.blocks.size() == 2);

  const PeierlsResult blk = peierls_estimate_mc(k, row_sites(4, 4), 4, 100000, 5);
  CHECK(blk.blocks.size() == 1);
  CHECK(blk.delta < 1e-3);
  CHECK(blk.bound == doctest::Approx(std::pow(c_of_delta(blk.delta), 4) / 24.0));
  CHECK(blk.mc.estimate <= blk.bound + 3.0 * blk.mc.std_error);
  CHECK(blk.implication_checked == 100000);
  CHECK(blk.implication_violations == 0);

  // Rows split into separate blocks per row.
  const PeierlsResult rows = peierls_estimate_mc(k, {{0, 0}, {3, 0}, {0, 5}}, 3, 2000, 6);
  CHECK(rows.blocks.size() == 2);
  CHECK(rows.implication_violations == 0);

  CHECK_THROWS_AS(peierls_estimate_mc(k, {}, 1, 10, 1), Error);
  CHECK_THROWS_AS(peierls_estimate_mc(k, {{0, 0}}, 0, 10, 1), Error);
  CHECK_THROWS_AS(peierls_estimate_mc(k, {{0, 0}, {0, 0}}, 1, 10, 1), Error);
}

TEST_CASE("Peierls constants") {
  for (double rho : {0.5, 0.7, 0.8, 0.9, 0.95}) {
    const PeierlsConstants pc = peierls_constants(rho);
    const auto ratio = [&](int n) {
      return std::exp(n * std::log(2.0) - std::lgamma(n + 1.0) - 2.0 * n * std::log(rho));
    };
    CHECK(ratio(pc.n0) <= 1.0);
    if (pc.n0 > 1) CHECK(ratio(pc.n0 - 1) > 1.0);
    const double r2n = std::pow(rho, 2.0 * pc.n0);
    CHECK(1.0 / double(pc.R0) <= r2n / 2.0 * (1.0 + 1e-12));
    CHECK(pc.delta0 > 0.0);
    CHECK(pc.delta0 < 0.5);
    // C(delta)^R0 / R0 in log form: R0 atanh(delta) - log R0.
    const double log_lhs = double(pc.R0) * std::atanh(pc.delta0) - std::log(double(pc.R0));
    CHECK(log_lhs <= std::log(r2n) + 1e-12);
    CHECK(log_lhs >= std::log(r2n) - 1e-6);
  }
  const PeierlsConstants p9 = peierls_constants(0.9);
  CHECK(p9.n0 == 5);
  CHECK(p9.R0 == 6);
  CHECK(peierls_constants(0.5).R0 == 2199023255552);
  CHECK_THROWS_AS(peierls_constants(0.3), BudgetError);
  CHECK_THROWS_AS(peierls_constants(0.0), Error);
  CHECK_THROWS_AS(peierls_constants(1.0), Error);
}
