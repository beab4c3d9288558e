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

#ifndef SHADOWPERC_RENORM_HPP_
#define SHADOWPERC_RENORM_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shadowperc/common.hpp"
#include "shadowperc/grid_io.hpp"
#include "shadowperc/loglinear.hpp"
#include "shadowperc/shadow.hpp"

namespace shadowperc {

// Sequence given by a finite prefix followed by a constant tail.
struct EventuallyConstant {
  std::vector<std::int64_t> prefix;
  std::int64_t tail = 1;

  std::int64_t at(std::size_t n) const { return n < prefix.size() ? prefix[n] : tail; }
  // Index of the symbolic slot holding term n: prefix terms have their own
  // slot, every tail term shares slot prefix.size().
  std::size_t slot(std::size_t n) const { return n < prefix.size() ? n : prefix.size(); }
  std::size_t slots() const { return prefix.size() + 1; }
  // Every distinct term: the prefix and then the tail.
  std::vector<std::int64_t> terms() const;
  static EventuallyConstant constant(std::int64_t v) { return {{}, v}; }
  // "a,b,c" means a, b, then c forever.
  static EventuallyConstant parse(const std::string& text);
  std::string to_string() const;
};

struct SchemeParams {
  int d = 2;
  std::int64_t lambda0 = 1;
  EventuallyConstant mu = EventuallyConstant::constant(1000000);
  EventuallyConstant sigma = EventuallyConstant::constant(100);
  int levels = 64;  // N

  BigInt lambda(int n) const;  // lambda_0 mu_0 ... mu_{n-1}
};

// Largest N with lambda_N < lambda (strict) or lambda_N <= lambda; -1 when
// no level qualifies. Scanning stops at params.levels.
int scale_index(const SchemeParams& params, const BigInt& lambda, bool strict = true);

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

// mu_n >= 100 sigma_n and sigma_n >= 2 for every n.
Verdict check_c1(const EventuallyConstant& mu, const EventuallyConstant& sigma);

struct C3Result {
  Verdict verdict;
  LogLinear exact;   // sum_n log2(mu_n) / 2^n over the mu slots
  double value = 0.0;
};
// Always convergent for eventually constant mu >= 1; the tail is summed as a
// geometric series.
C3Result check_c3(const EventuallyConstant& mu);

// log2(mu) for every slot of mu, rounded up.
std::vector<double> log2_slots(const EventuallyConstant& mu);

struct CertBounds {
  int d = 2;
  LogLinear sigma0_exact;
  double sigma0 = 0.0;
  std::vector<LogLinear> log2_a_exact;  // n = 0..levels
  std::vector<double> log2_a;
  bool claim_a_holds = false;           // 0 <= log2 a_n <= 2^n log2 a_0
  double epsilon0 = 0.0;
  double log2_epsilon0 = 0.0;

  // Filled by iterate_pn.
  double epsilon = 0.0;
  double log2_p0 = -kInf;
  std::vector<double> log2_aux;         // index n >= 1; entry 0 unused
  std::vector<double> log2_p;           // certified upper bounds
  std::vector<std::uint8_t> level_pass;         // log2 p_n <= -2^n
  std::vector<std::uint8_t> level_pass_strong;  // log2 p_n <= -2^n - log2 a_n
  int levels_reached = 0;

  std::vector<Verdict> verdicts;
  bool all_pass() const;
};

// Sigma_0 = sum_{n >= 1} (1 + 2d log2(mu_{n-1})) / 2^n in exact form. No
// condition on mu beyond positivity.
LogLinear sigma0_exact(int d, const EventuallyConstant& mu);
// log2 of 0.99 min(1 / (2 + Sigma_0), 2^-Sigma_0 / 2).
double log2_epsilon0_of(double sigma0);

// Sigma_0, a_n and epsilon_0 = 0.99 min(1 / (2 + Sigma_0), 2^-Sigma_0 / 2).
// Throws when C1 or C3 fails.
CertBounds epsilon0(const SchemeParams& params);

// Log2 bound on sup P(B_u^(n) fails) for level n >= 1.
using AuxBound = std::function<double(int n)>;

// Upper bounds on p_n from p_n <= aux_n + mu_{n-1}^{2d} p_{n-1}^2, carried
// in log2 with every operation rounded towards +inf. The default auxiliary
// bound is 2^(-2^n / epsilon).
CertBounds iterate_pn(const SchemeParams& params, double log2_p0, double epsilon,
                      const AuxBound& aux = nullptr);

struct FormalSupport {
  int level = 0;
  std::vector<BigInt> u;
  BigInt half_width;                // sigma_0 lambda_0 at n = 0, else 2 sigma_n lambda_n
  BigInt recursive_lo, recursive_hi;  // exact offsets of the recursive union
  bool inclusion_certified = false;
  std::vector<Verdict> steps;

  std::vector<BigInt> lo() const;
  std::vector<BigInt> hi() const;
};

// Box enclosing the formal support of A_u^(n), with the inductive
// inclusion lambda_k + 2 sigma_{k-1} lambda_{k-1} <= 2 sigma_k lambda_k
// checked exactly for k = 1..n.
FormalSupport formal_support(const SchemeParams& params, int n, std::vector<BigInt> u);
bool supports_disjoint(const FormalSupport& a, const FormalSupport& b);

// ---------------------------------------------------------------------------
// Event simulation (d = 2). Points of L_n are addressed by integer indices
// (i, j) standing for lambda_n (i, j).

struct LevelMap {
  int level = 0;
  std::int64_t lambda = 1;
  std::int64_t i0 = 0, j0 = 0, ni = 0, nj = 0;
  std::vector<std::uint8_t> event;  // seed (level 0) or auxiliary event
  std::vector<std::uint8_t> good;   // A^(n)

  bool contains(std::int64_t i, std::int64_t j) const {
    return i >= i0 && i < i0 + ni && j >= j0 && j < j0 + nj;
  }
  std::size_t index(std::int64_t i, std::int64_t j) const {
    return static_cast<std::size_t>((j - j0) * ni + (i - i0));
  }
};

class GoodMap {
 public:
  GoodMap(SchemeParams params, std::vector<LevelMap> levels, bool c1_holds);

  const SchemeParams& params() const { return params_; }
  int top_level() const { return static_cast<int>(levels_.size()) - 1; }
  const LevelMap& level(int n) const { return levels_.at(static_cast<std::size_t>(n)); }
  // Runs at C1-violating desk scale test the recursion only.
  bool c1_holds() const { return c1_holds_; }

  bool good(int n, std::int64_t i, std::int64_t j) const;
  // All A^(k) along the renormalization sequence of (i, j) in L_m, k = m..n.
  bool good_up_to(int m, std::int64_t i, std::int64_t j, int n) const;
  // Index of the L_{n+1} cell containing (i, j) in L_n.
  std::array<std::int64_t, 2> parent(int n, std::int64_t i, std::int64_t j) const;

  std::vector<GridRecord> to_records() const;

 private:
  SchemeParams params_;
  std::vector<LevelMap> levels_;
  bool c1_holds_;
};

// Seed predicate receives the coordinates of u in L_0; auxiliary predicate
// receives (n, coordinates of u in L_n). Both close over the realization
// and decide their own boxes.
using SeedPredicate = std::function<bool(std::int64_t x, std::int64_t y)>;
using AuxPredicate = std::function<bool(int n, std::int64_t x, std::int64_t y)>;

// Cells [i0, i0 + ni) x [j0, j0 + nj) of L_level.
struct SchemeBox {
  int level = 1;
  std::int64_t i0 = 0, j0 = 0, ni = 1, nj = 1;
};

// A^(n) evaluated level by level: B_u^(n) holds and the bad children of u
// have l_inf index diameter below 5 sigma_{n-1}, which is exactly the
// pairwise condition of the recursion.
GoodMap simulate_scheme(const SchemeParams& params, const SchemeBox& box,
                        const SeedPredicate& seed, const AuxPredicate& aux,
                        unsigned workers = 1);

// Seed predicate "alpha <= ell on every valid site of u + [0, lambda_0]^2"
// for a shadow field on unit spacing whose site (0, 0) sits at the origin.
SeedPredicate shadow_seed_predicate(const ShadowField& shadow, double ell,
                                    std::int64_t lambda0);

struct LatticePath {
  int level = 0;
  std::vector<std::array<std::int64_t, 2>> points;  // indices in L_level
};

// Inclusive index box in L_{m-1}.
struct IndexBox {
  std::int64_t i0 = 0, j0 = 0, i1 = -1, j1 = -1;
  bool empty() const { return i1 < i0 || j1 < j0; }
  bool contains(std::int64_t i, std::int64_t j) const {
    return !empty() && i >= i0 && i <= i1 && j >= j0 && j <= j1;
  }
};

struct ExtractedPath {
  LatticePath path;
  std::vector<IndexBox> bad_boxes;  // per coarse cell
  double min_face_fraction = 1.0;   // smallest usable share of a used face
  bool face_certificate = true;     // every used face at least 3/4 usable
};

class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& what, int level, std::int64_t i, std::int64_t j)
      : Error(what), level_(level), i_(i), j_(j) {}
  int level() const { return level_; }
  std::int64_t i() const { return i_; }
  std::int64_t j() const { return j_; }

 private:
  int level_;
  std::int64_t i_, j_;
};

// Refines a nearest-neighbour path of L_m points good up to scale n into a
// nearest-neighbour path of L_{m-1} points good up to scale n, starting in
// the first coarse cell and ending in the last.
ExtractedPath extract_path(const GoodMap& map, const LatticePath& coarse, int n);

// ---------------------------------------------------------------------------
// Bootstrap certificate for crossing probabilities.

struct BootstrapInputs {
  double a = 1.0;  // finite-range exponents (a, b), b > 1
  double b = 2.0;
  double lambda0 = 10.0;
  double ell = 0.0;
  double ell_prime = 1.0;
  double u0 = 0.5;
  double C1 = 1.0;
  double c1 = 1.0;
  int levels = 40;
};

struct BootstrapCert {
  BootstrapInputs inputs;
  double delta = 0.0;  // (1/b + 1) / 2
  double gamma = 0.0;  // (b delta - 1) / (2a)
  std::vector<double> lambda;
  std::vector<double> ell;
  std::vector<double> eps;
  std::vector<double> log2_P;  // recursion P_{n+1} = 49 P_n^2 + C1 e^{-c1 lambda_n}
  std::vector<double> log2_u;  // u_n = 49 (P_n + C1 e^{-c1 lambda_n / 2})
  bool lambda_converges = false;
  double growth_constant = 0.0;  // lambda_N / 2^N
  double growth_tail = kInf;     // bound on the remaining change of lambda_n / 2^n
  std::vector<Verdict> checks;
  bool all_pass() const;
};

BootstrapCert bootstrap_cert(const BootstrapInputs& in);

}  // namespace shadowperc

#endif  // SHADOWPERC_RENORM_HPP_
