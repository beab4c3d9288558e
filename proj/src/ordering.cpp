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

#include "shadowperc/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "shadowperc/parallel.hpp"
#include "shadowperc/rng.hpp"

namespace shadowperc {
namespace {

constexpr std::int64_t kChunk = 4096;

McEstimate finish(std::int64_t trials, std::int64_t hits, std::int64_t ties) {
  McEstimate e;
  e.trials = trials;
  e.hits = hits;
  e.ties = ties;
  e.estimate = static_cast<double>(hits) / static_cast<double>(trials);
  e.std_error = std::sqrt(e.estimate * (1.0 - e.estimate) / static_cast<double>(trials));
  return e;
}

void sample(const CovMatrix& cov, RandomStream& rs, std::vector<double>& z,
            std::vector<double>& x) {
  const std::size_t n = cov.n;
  for (std::size_t i = 0; i < n; ++i) z[i] = rs.normal();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += cov.factor[i * n + k] * z[k];
    x[i] = s;
  }
}

}  // namespace

std::size_t CovMatrix::index_of(const Site& s) const {
  const auto it = std::lower_bound(sites.begin(), sites.end(), s);
  if (it == sites.end() || *it != s) throw Error("site not in covariance matrix");
  return static_cast<std::size_t>(it - sites.begin());
}

void factorize(CovMatrix& cov) {
  const std::size_t n = cov.n;
  cov.factor.assign(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = cov.sigma[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= cov.factor[j * n + k] * cov.factor[j * n + k];
    if (!(d >= kPivotFloor)) {
      std::ostringstream os;
      os << "covariance matrix is not numerically positive definite: pivot " << d
         << " at row " << j << " (floor " << kPivotFloor << ")";
      throw FactorizationError(os.str(), d, j);
    }
    const double l = std::sqrt(d);
    cov.factor[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = cov.sigma[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= cov.factor[i * n + k] * cov.factor[j * n + k];
      cov.factor[i * n + j] = s / l;
    }
  }
}

CovMatrix build_covariance(const Kernel& k, std::vector<Site> sites) {
  if (sites.empty()) throw Error("site set is empty");
  std::sort(sites.begin(), sites.end());
  if (std::adjacent_find(sites.begin(), sites.end()) != sites.end()) {
    throw Error("site set contains duplicates");
  }
  CovMatrix cov;
  cov.n = sites.size();
  cov.sites = std::move(sites);
  cov.kernel_id = k.id();
  cov.sigma.assign(cov.n * cov.n, 0.0);
  std::map<std::pair<std::int64_t, std::int64_t>, double> cache;
  for (std::size_t i = 0; i < cov.n; ++i) {
    for (std::size_t j = i; j < cov.n; ++j) {
      std::int64_t dx = cov.sites[i][0] - cov.sites[j][0];
      std::int64_t dy = cov.sites[i][1] - cov.sites[j][1];
      const auto key = std::make_pair(std::abs(dx), std::abs(dy));
      auto it = cache.find(key);
      if (it == cache.end()) {
        it = cache.emplace(key, covariance(k, {static_cast<double>(dx), static_cast<double>(dy)})).first;
      }
      cov.sigma[i * cov.n + j] = it->second;
      cov.sigma[j * cov.n + i] = it->second;
    }
  }
  factorize(cov);
  return cov;
}

CovMatrix covariance_from_matrix(std::vector<double> sigma, std::size_t n) {
  if (n == 0 || sigma.size() != n * n) throw Error("matrix size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (sigma[i * n + j] != sigma[j * n + i]) throw Error("matrix is not symmetric");
    }
  }
  CovMatrix cov;
  cov.n = n;
  for (std::size_t i = 0; i < n; ++i) cov.sites.push_back({static_cast<std::int64_t>(i), 0});
  cov.sigma = std::move(sigma);
  cov.kernel_id = "matrix";
  factorize(cov);
  return cov;
}

double gershgorin_delta(const CovMatrix& cov) {
  double delta = 0.0;
  for (std::size_t i = 0; i < cov.n; ++i) {
    if (std::abs(cov.at(i, i) - 1.0) > 1e-12) {
      throw Error("gershgorin_delta needs a unit diagonal; normalize the kernel variance first");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < cov.n; ++j) {
      if (j != i) s += std::abs(cov.at(i, j));
    }
    delta = std::max(delta, s);
  }
  return delta;
}

double c_of_delta(double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw Error("C(delta) needs 0 <= delta < 1");
  return std::sqrt((1.0 + delta) / (1.0 - delta));
}

std::vector<std::size_t> OrderingSpec::sizes() const {
  std::vector<std::size_t> s;
  for (const auto& b : blocks) s.push_back(b.size());
  return s;
}

void OrderingSpec::validate(std::size_t n) const {
  if (blocks.size() != perms.size()) throw Error("one permutation per block is required");
  std::vector<int> seen(n, 0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].empty()) throw Error("ordering blocks must be nonempty");
    if (perms[b].size() != blocks[b].size()) throw Error("permutation size does not match block");
    std::vector<int> p = perms[b];
    std::sort(p.begin(), p.end());
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p[k] != static_cast<int>(k) + 1) throw Error("block permutation is not a permutation of 1..n");
    }
    for (std::size_t k = 0; k < blocks[b].size(); ++k) {
      const std::size_t s = blocks[b][k];
      if (s >= n || seen[s]++) throw Error("ordering blocks must be disjoint subsets of the sites");
      if (k > 0 && s <= blocks[b][k - 1]) throw Error("block sites must be listed in increasing order");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error("ordering blocks must cover every site");
  }
}

OrderingSpec OrderingSpec::identity_blocks(std::vector<std::vector<std::size_t>> blocks) {
  OrderingSpec s;
  for (const auto& b : blocks) {
    std::vector<int> p(b.size());
    std::iota(p.begin(), p.end(), 1);
    s.perms.push_back(std::move(p));
  }
  s.blocks = std::move(blocks);
  return s;
}

bool follows_ordering(const std::vector<double>& x, const OrderingSpec& spec, bool* tie) {
  bool ok = true;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& blk = spec.blocks[b];
    const auto& perm = spec.perms[b];
    // Site of rank r (1 = largest) is blk[k] with perm[k] = r.
    std::vector<std::size_t> by_rank(blk.size());
    for (std::size_t k = 0; k < blk.size(); ++k) by_rank[static_cast<std::size_t>(perm[k] - 1)] = blk[k];
    for (std::size_t r = 0; r + 1 < by_rank.size(); ++r) {
      const double gap = x[by_rank[r]] - x[by_rank[r + 1]];
      if (std::abs(gap) < kTieGap) {
        if (tie) *tie = true;
        ok = false;
      } else if (gap < 0.0) {
        ok = false;
      }
    }
  }
  return ok;
}

McEstimate ordering_probability_mc(const CovMatrix& cov, const OrderingSpec& spec,
                                   std::int64_t trials, std::uint64_t seed, unsigned workers) {
  if (trials < 1000) throw Error("ordering_probability_mc needs at least 1000 trials");
  spec.validate(cov.n);
  const auto chunks = static_cast<std::size_t>((trials + kChunk - 1) / kChunk);
  std::vector<std::int64_t> hits(chunks, 0), ties(chunks, 0);
  parallel_for(chunks, workers, [&](std::size_t c) {
    std::vector<double> z(cov.n), x(cov.n);
    const std::int64_t t0 = static_cast<std::int64_t>(c) * kChunk;
    const std::int64_t t1 = std::min(trials, t0 + kChunk);
    for (std::int64_t t = t0; t < t1; ++t) {
      RandomStream rs(seed, static_cast<std::uint64_t>(t));
      sample(cov, rs, z, x);
      bool tie = false;
      if (follows_ordering(x, spec, &tie)) ++hits[c];
      if (tie) ++ties[c];
    }
  });
  return finish(trials, std::accumulate(hits.begin(), hits.end(), std::int64_t{0}),
                std::accumulate(ties.begin(), ties.end(), std::int64_t{0}));
}

OrderingBounds ordering_bounds(const OrderingSpec& spec, double delta) {
  const double c = c_of_delta(delta);
  double lo = 1.0, hi = 1.0;
  for (std::size_t n : spec.sizes()) {
    const double fact = std::tgamma(static_cast<double>(n) + 1.0);
    const double cn = std::pow(c, static_cast<double>(n));
    lo *= 1.0 / (cn * fact);
    hi *= cn / fact;
  }
  return {lo, hi};
}

std::vector<std::vector<std::int64_t>> r_connected_decompose(
    const std::vector<std::int64_t>& row, std::int64_t R) {
  if (R < 1) throw Error("R must be positive");
  std::vector<std::vector<std::int64_t>> blocks;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (k > 0 && row[k] <= row[k - 1]) throw Error("row sites must be sorted and distinct");
    if (k == 0 || row[k] - row[k - 1] > R) blocks.emplace_back();
    blocks.back().push_back(row[k]);
  }
  return blocks;
}

PeierlsResult peierls_estimate_mc(const Kernel& k, std::vector<Site> A, std::int64_t R,
                                  std::int64_t trials, std::uint64_t seed, unsigned workers) {
  if (A.empty()) throw Error("site set is empty");
  if (R < 1) throw Error("R must be positive");
  if (trials < 1) throw Error("trials must be positive");
  std::sort(A.begin(), A.end(), [](const Site& a, const Site& b) {
    return a[1] != b[1] ? a[1] < b[1] : a[0] < b[0];
  });
  if (std::adjacent_find(A.begin(), A.end()) != A.end()) throw Error("site set contains duplicates");

  PeierlsResult res;
  const CovMatrix covA = build_covariance(k, A);
  res.delta = gershgorin_delta(covA);
  std::vector<Site> S;
  for (const Site& u : A) {
    for (std::int64_t r = 0; r <= R; ++r) S.push_back({u[0] + r, u[1]});
  }
  std::sort(S.begin(), S.end());
  S.erase(std::unique(S.begin(), S.end()), S.end());
  if (S.size() > 4096) throw BudgetError("Peierls sample set exceeds 4096 sites");
  const CovMatrix cov = build_covariance(k, S);

  // Rows of A split into R-connected blocks.
  std::vector<std::vector<std::size_t>> block_idx;
  res.bound = 1.0;
  // The sandwich is void once delta reaches 1; the bound is then +inf.
  const double c = res.delta < 1.0 ? c_of_delta(res.delta) : kInf;
  for (std::size_t s = 0; s < A.size();) {
    std::size_t e = s;
    std::vector<std::int64_t> row;
    while (e < A.size() && A[e][1] == A[s][1]) row.push_back(A[e++][0]);
    for (const auto& blk : r_connected_decompose(row, R)) {
      std::vector<Site> sites;
      std::vector<std::size_t> idx;
      for (std::int64_t x : blk) {
        sites.push_back({x, A[s][1]});
        idx.push_back(cov.index_of({x, A[s][1]}));
      }
      const double n = static_cast<double>(blk.size());
      res.bound *= std::pow(c, n) / std::tgamma(n + 1.0);
      res.blocks.push_back(std::move(sites));
      block_idx.push_back(std::move(idx));
    }
    s = e;
  }
  const OrderingSpec spec = OrderingSpec::identity_blocks(block_idx);
  std::vector<std::vector<std::size_t>> shifts;
  for (const Site& u : A) {
    std::vector<std::size_t> v;
    for (std::int64_t r = 0; r <= R; ++r) v.push_back(cov.index_of({u[0] + r, u[1]}));
    shifts.push_back(std::move(v));
  }

  const auto chunks = static_cast<std::size_t>((trials + kChunk - 1) / kChunk);
  std::vector<std::int64_t> hits(chunks, 0), bad(chunks, 0);
  parallel_for(chunks, workers, [&](std::size_t ch) {
    std::vector<double> z(cov.n), x(cov.n);
    const std::int64_t t0 = static_cast<std::int64_t>(ch) * kChunk;
    const std::int64_t t1 = std::min(trials, t0 + kChunk);
    for (std::int64_t t = t0; t < t1; ++t) {
      RandomStream rs(seed, static_cast<std::uint64_t>(t));
      sample(cov, rs, z, x);
      bool event = true;
      for (const auto& v : shifts) {
        for (std::size_t r = 1; r < v.size() && event; ++r) event = x[v[r]] <= x[v[0]];
        if (!event) break;
      }
      if (!event) continue;
      ++hits[ch];
      if (!follows_ordering(x, spec, nullptr)) ++bad[ch];
    }
  });
  res.mc = finish(trials, std::accumulate(hits.begin(), hits.end(), std::int64_t{0}), 0);
  res.implication_checked = trials;
  res.implication_violations = std::accumulate(bad.begin(), bad.end(), std::int64_t{0});
  return res;
}

PeierlsConstants peierls_constants(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error("rho must lie in (0, 1)");
  PeierlsConstants pc;
  pc.rho = rho;
  const double a = std::log(2.0) - 2.0 * std::log(rho);
  int n = 1;
  while (static_cast<double>(n) * a - std::lgamma(n + 1.0) > 0.0) ++n;
  pc.n0 = n;
  const double r2n = std::pow(rho, 2.0 * n);
  const double R0 = std::ceil(2.0 / r2n);
  if (!(R0 <= 0x1p62)) throw BudgetError("R0 exceeds 2^62 for this rho");
  pc.R0 = static_cast<std::int64_t>(R0);
  // log C(delta) = atanh(delta), so C(delta0)^R0 = R0 rho^(2 n0) solves as
  // delta0 = tanh(log(R0 rho^(2 n0)) / R0), rounded down.
  const double R = static_cast<double>(pc.R0);
  const double d = std::tanh(std::log(R * r2n) / R);
  pc.delta0 = std::min(std::nextafter(d, 0.0), std::nextafter(0.5, 0.0));
  return pc;
}

}  // namespace shadowperc
