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

#include <cmath>
#include <deque>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "shadowperc/renorm.hpp"

using namespace shadowperc;

namespace {

SchemeParams large_params() {
  SchemeParams p;
  p.d = 2;
  p.mu = EventuallyConstant::constant(1000000);
  p.sigma = EventuallyConstant::constant(100);
  p.levels = 64;
  return p;
}

SchemeParams desk_params(std::int64_t mu, std::int64_t sigma, int levels) {
  SchemeParams p;
  p.d = 2;
  p.lambda0 = 1;
  p.mu = EventuallyConstant::constant(mu);
  p.sigma = EventuallyConstant::constant(sigma);
  p.levels = levels;
  return p;
}

using Cell = std::pair<std::int64_t, std::int64_t>;

std::int64_t fdiv(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Bad sets per level, addressed by level-n indices.
struct EventTable {
  std::vector<std::set<Cell>> bad;  // bad[n] for n = 0..top
  std::int64_t lambda0 = 1;
  std::vector<std::int64_t> lambda;

  SeedPredicate seed() const {
    return [this](std::int64_t x, std::int64_t y) {
      return !bad[0].count({x / lambda0, y / lambda0});
    };
  }
  AuxPredicate aux() const {
    return [this](int n, std::int64_t x, std::int64_t y) {
      const auto l = lambda[static_cast<std::size_t>(n)];
      return !bad[static_cast<std::size_t>(n)].count({x / l, y / l});
    };
  }
};

// Random box of side at most `side` inside the mu x mu children of (I, J).
IndexBox random_box(std::mt19937_64& rng, std::int64_t I, std::int64_t J, std::int64_t mu,
                    std::int64_t side) {
  std::uniform_int_distribution<std::int64_t> S(1, side);
  const std::int64_t w = S(rng), h = S(rng);
  std::uniform_int_distribution<std::int64_t> X(0, mu - w), Y(0, mu - h);
  // Adversarial placement against a face half of the time.
  std::int64_t x = X(rng), y = Y(rng);
  if (rng() % 2) x = rng() % 2 ? 0 : mu - w;
  if (rng() % 2) y = rng() % 2 ? 0 : mu - h;
  return {I * mu + x, J * mu + y, I * mu + x + w - 1, J * mu + y + h - 1};
}

void add_box(std::set<Cell>& s, const IndexBox& b) {
  for (auto j = b.j0; j <= b.j1; ++j) {
    for (auto i = b.i0; i <= b.i1; ++i) s.insert({i, j});
  }
}

}  // namespace

TEST_CASE("eventually constant sequences") {
  const EventuallyConstant e = EventuallyConstant::parse("3, 5,7");
  CHECK(e.prefix == std::vector<std::int64_t>{3, 5});
  CHECK(e.tail == 7);
  CHECK(e.at(0) == 3);
  CHECK(e.at(1) == 5);
  CHECK(e.at(2) == 7);
  CHECK(e.at(1000) == 7);
  CHECK(e.slot(5) == 2);
  CHECK(e.slots() == 3);
  CHECK(e.to_string() == "3,5,7");
  CHECK(EventuallyConstant::parse(e.to_string()).terms() == e.terms());
  CHECK(EventuallyConstant::parse("9").prefix.empty());
  CHECK_THROWS_AS(EventuallyConstant::parse(""), Error);
  CHECK_THROWS_AS(EventuallyConstant::parse("1,x"), Error);
}

TEST_CASE("scheme scales and scale index") {
  SchemeParams p = desk_params(10, 2, 6);
  p.lambda0 = 3;
  CHECK(p.lambda(0) == 3);
  CHECK(p.lambda(2) == 300);
  CHECK(scale_index(p, 300, true) == 1);
  CHECK(scale_index(p, 300, false) == 2);
  CHECK(scale_index(p, 301, true) == 2);
  CHECK(scale_index(p, 3, true) == -1);
  CHECK(scale_index(p, BigInt(1) << 200, true) == 6);
}

TEST_CASE("condition C1") {
  const auto c = [](std::int64_t m, std::int64_t s) {
    return check_c1(EventuallyConstant::constant(m), EventuallyConstant::constant(s)).pass;
  };
  CHECK(c(1000000, 100));
  CHECK_FALSE(c(199, 2));
  CHECK(c(200, 2));
  CHECK_FALSE(c(1000, 1));
  const Verdict v = check_c1(EventuallyConstant::parse("1000,150,1000"),
                             EventuallyConstant::constant(2));
  CHECK_FALSE(v.pass);
  CHECK(v.detail.find("mu_1") != std::string::npos);
}

TEST_CASE("condition C3 limits") {
  const C3Result two = check_c3(EventuallyConstant::constant(2));
  CHECK(two.verdict.pass);
  CHECK(two.value == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(two.exact.constant() == 0);
  CHECK(two.exact.coefficient(0) == 2);

  CHECK(check_c3(EventuallyConstant::constant(1)).value == 0.0);
  const C3Result big = check_c3(EventuallyConstant::constant(1000000));
  CHECK(big.value == doctest::Approx(2.0 * std::log2(1e6)).epsilon(1e-14));
  CHECK(big.value == doctest::Approx(39.863137).epsilon(1e-7));

  // Prefix terms weigh 2^-n; the tail from n = 2 weighs 2^-1.
  const C3Result mixed = check_c3(EventuallyConstant::parse("2,4,8"));
  CHECK(mixed.value == doctest::Approx(1.0 + 1.0 + 1.5).epsilon(1e-15));
  CHECK_FALSE(check_c3(EventuallyConstant::constant(0)).verdict.pass);
}

TEST_CASE("Sigma_0 and epsilon_0") {
  const CertBounds cb = epsilon0(large_params());
  CHECK(std::abs(cb.sigma0 - (1.0 + 4.0 * std::log2(1e6))) < 1e-9);
  CHECK(cb.sigma0 == doctest::Approx(80.726274277).epsilon(1e-10));
  CHECK(cb.claim_a_holds);
  CHECK(cb.log2_a.size() == 65);
  CHECK(cb.epsilon0 == doctest::Approx(0.99 * std::exp2(-cb.sigma0 - 1.0)).epsilon(1e-12));
  CHECK(cb.epsilon0 < 1.0 / (2.0 + cb.sigma0));

  // a_n recursion in the stored exact form.
  const Rational d = 2;
  for (std::size_t n = 1; n < cb.log2_a_exact.size(); ++n) {
    CHECK(cb.log2_a_exact[n] ==
          Rational(2) * cb.log2_a_exact[n - 1] - LogLinear(1) - LogLinear::basis(0, 2 * d));
    CHECK(cb.log2_a[n] >= 0.0);
    CHECK(cb.log2_a[n] <= std::ldexp(cb.log2_a[0], static_cast<int>(n)));
  }

  // mu = 2 fails C1 but the closed forms still apply.
  const LogLinear s2 = sigma0_exact(2, EventuallyConstant::constant(2));
  CHECK(s2.evaluate(std::vector<double>{1.0}) == 5.0);
  CHECK(std::exp2(log2_epsilon0_of(5.0)) == doctest::Approx(0.99 * std::min(1.0 / 7.0, 1.0 / 64.0)).epsilon(1e-15));
  CHECK(std::exp2(log2_epsilon0_of(0.0)) == doctest::Approx(0.99 * 0.5).epsilon(1e-15));

  CHECK_THROWS_AS(epsilon0(desk_params(1, 100, 4)), Error);
  CHECK_THROWS_AS(epsilon0(desk_params(2, 2, 4)), Error);
}

TEST_CASE("p_n certification with mu = 10^6 and sigma = 100") {
  const SchemeParams p = large_params();
  const CertBounds e = epsilon0(p);
  const double eps = e.epsilon0;
  const CertBounds cb = iterate_pn(p, e.log2_epsilon0 - 1.0, eps);
  CHECK(cb.levels_reached == 64);
  CHECK(cb.all_pass());
  for (int n = 0; n <= 64; ++n) {
    CHECK(cb.level_pass[static_cast<std::size_t>(n)]);
    CHECK(cb.log2_p[static_cast<std::size_t>(n)] <= -std::ldexp(1.0, n));
  }
  for (int n = 1; n <= 64; ++n) {
    CHECK(cb.log2_aux[static_cast<std::size_t>(n)] >= -std::ldexp(1.0, n) / eps);
  }

  // Impossible seed events: the auxiliary bound alone.
  const CertBounds z = iterate_pn(p, -kInf, eps);
  CHECK(z.all_pass());
  CHECK(z.log2_p[1] == z.log2_aux[1]);

  const CertBounds big = iterate_pn(p, e.log2_epsilon0 - 1.0, 2.0 * eps);
  CHECK_FALSE(big.all_pass());
  const CertBounds hi_p0 = iterate_pn(p, e.log2_epsilon0 + 1.0, eps);
  CHECK_FALSE(hi_p0.all_pass());

  SchemeParams deep = p;
  deep.levels = 1100;
  const CertBounds d = iterate_pn(deep, e.log2_epsilon0 - 1.0, eps);
  CHECK(d.levels_reached == 1023);
  CHECK_FALSE(d.all_pass());
  CHECK_THROWS_AS(iterate_pn(p, -10.0, 0.0), Error);
}

TEST_CASE("p_n bounds match exact rational recursion") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 40; ++t) {
    const std::int64_t mu = 200 + static_cast<std::int64_t>(rng() % 300);
    SchemeParams p = desk_params(mu, 2, static_cast<int>(1 + rng() % 4));
    const int k0 = 20 + static_cast<int>(rng() % 40);
    const int aux_scale = 20 + static_cast<int>(rng() % 50);
    const AuxBound aux = [aux_scale](int n) { return -double(aux_scale) * std::ldexp(1.0, n); };
    const CertBounds cb = iterate_pn(p, -double(k0), 1e-30, aux);

    Rational exact = Rational(1) / (BigInt(1) << k0);
    const BigInt m4 = BigInt(mu) * mu * mu * mu;
    for (int n = 1; n <= p.levels; ++n) {
      const BigInt den = BigInt(1) << (aux_scale << n);
      exact = Rational(1) / den + Rational(m4) * exact * exact;
      // log2(exact) from its numerator and denominator bit lengths plus a
      // double mantissa.
      const BigInt num = boost::multiprecision::numerator(exact);
      const BigInt dnm = boost::multiprecision::denominator(exact);
      const long nb = static_cast<long>(boost::multiprecision::msb(num));
      const long db = static_cast<long>(boost::multiprecision::msb(dnm));
      const double nm = static_cast<double>(BigInt(num >> std::max(0L, nb - 60))) ;
      const double dm = static_cast<double>(BigInt(dnm >> std::max(0L, db - 60)));
      const double lg = std::log2(nm) + double(std::max(0L, nb - 60)) -
                        std::log2(dm) - double(std::max(0L, db - 60));
      const double bound = cb.log2_p[static_cast<std::size_t>(n)];
      CHECK(lg <= bound + 1e-12);
      CHECK(bound - lg < 1e-9 * std::max(1.0, std::abs(lg)));
    }
  }
}

TEST_CASE("formal supports") {
  const SchemeParams p = large_params();
  const FormalSupport s0 = formal_support(p, 0, {7, -3});
  CHECK(s0.half_width == 100);
  CHECK(s0.lo() == std::vector<BigInt>{-93, -103});
  CHECK(s0.hi() == std::vector<BigInt>{107, 97});
  CHECK(s0.inclusion_certified);

  const FormalSupport s1 = formal_support(p, 1, {0, 0});
  CHECK(s1.half_width == 2 * 100 * BigInt(1000000));
  CHECK(s1.inclusion_certified);
  CHECK(s1.steps.size() == 1);
  CHECK(s1.steps[0].pass);

  for (int n = 0; n <= 10; ++n) {
    const BigInt ln = p.lambda(n);
    const FormalSupport a = formal_support(p, n, {0, 0});
    CHECK(a.inclusion_certified);
    CHECK(a.recursive_lo >= -a.half_width);
    CHECK(a.recursive_hi <= a.half_width);
    const BigInt far = 5 * 100 * ln;
    CHECK(supports_disjoint(a, formal_support(p, n, {far, 0})));
    CHECK(supports_disjoint(a, formal_support(p, n, {-far, far})));
    if (n > 0) CHECK_FALSE(supports_disjoint(a, formal_support(p, n, {4 * 100 * ln, 0})));
  }

  const FormalSupport bad = formal_support(desk_params(1, 2, 3), 2, {0, 0});
  CHECK_FALSE(bad.inclusion_certified);
  CHECK_THROWS_AS(formal_support(p, 1, {5, 0}), Error);
  CHECK_THROWS_AS(formal_support(p, 0, {5}), Error);
}

TEST_CASE("scheme simulation examples") {
  const SchemeParams p = desk_params(8, 1, 2);
  const auto yes = [](std::int64_t, std::int64_t) { return true; };
  const auto aux_yes = [](int, std::int64_t, std::int64_t) { return true; };
  const GoodMap all = simulate_scheme(p, {2, 0, 0, 2, 2}, yes, aux_yes);
  CHECK_FALSE(all.c1_holds());
  CHECK(all.top_level() == 2);
  CHECK(all.level(0).ni == 128);
  for (int n = 0; n <= 2; ++n) {
    const LevelMap& lv = all.level(n);
    CHECK(std::count(lv.good.begin(), lv.good.end(), 1) == lv.ni * lv.nj);
  }

  // One bad 5x5 block of children keeps the parent good.
  std::set<Cell> bad0;
  add_box(bad0, {3, 3, 7, 7});
  const auto seed1 = [&](std::int64_t x, std::int64_t y) { return !bad0.count({x, y}); };
  const GoodMap one = simulate_scheme(p, {1, 0, 0, 1, 1}, seed1, aux_yes);
  CHECK(one.good(1, 0, 0));
  CHECK_FALSE(one.good(0, 5, 5));

  // A 6-wide spread does not fit: the parent is bad.
  std::set<Cell> bad1{{0, 0}, {5, 0}};
  const auto seed2 = [&](std::int64_t x, std::int64_t y) { return !bad1.count({x, y}); };
  const GoodMap two = simulate_scheme(p, {1, 0, 0, 1, 1}, seed2, aux_yes);
  CHECK_FALSE(two.good(1, 0, 0));
  std::set<Cell> bad2{{0, 0}, {4, 4}};
  const auto seed3 = [&](std::int64_t x, std::int64_t y) { return !bad2.count({x, y}); };
  CHECK(simulate_scheme(p, {1, 0, 0, 1, 1}, seed3, aux_yes).good(1, 0, 0));

  // The auxiliary event is part of the conjunction.
  const auto aux_no = [](int n, std::int64_t x, std::int64_t) { return !(n == 1 && x == 8); };
  const GoodMap ax = simulate_scheme(p, {1, 0, 0, 2, 1}, yes, aux_no);
  CHECK(ax.good(1, 0, 0));
  CHECK_FALSE(ax.good(1, 1, 0));
  CHECK(ax.level(1).event[1] == 0);

  // Level 0 seeds see L_0 coordinates lambda_0 (i, j).
  SchemeParams q = p;
  q.lambda0 = 3;
  std::vector<Cell> seen;
  const auto rec = [&](std::int64_t x, std::int64_t y) {
    seen.push_back({x, y});
    return true;
  };
  simulate_scheme(q, {0, -1, 2, 2, 1}, rec, nullptr);
  CHECK(seen == std::vector<Cell>{{-3, 6}, {0, 6}});

  CHECK_THROWS_AS(simulate_scheme(p, {1, 0, 0, 0, 1}, yes, aux_yes), Error);
  CHECK_THROWS_AS(simulate_scheme(p, {1, 0, 0, 1, 1}, yes, nullptr), Error);
  CHECK_THROWS_AS(simulate_scheme(desk_params(1000, 1, 3), {3, 0, 0, 1, 1}, yes, aux_yes),
                  BudgetError);
}

TEST_CASE("scheme simulation is monotone in the events") {
  const SchemeParams p = desk_params(6, 1, 2);
  std::mt19937_64 rng(32);
  for (int t = 0; t < 30; ++t) {
    EventTable ev;
    ev.lambda = {1, 6, 36};
    ev.bad.resize(3);
    const double rate = 0.01 + 0.01 * (t % 5);
    for (std::int64_t j = 0; j < 24; ++j) {
      for (std::int64_t i = 0; i < 24; ++i) {
        if (std::uniform_real_distribution<double>(0, 1)(rng) < rate) ev.bad[0].insert({i, j});
      }
    }
    for (std::int64_t j = 0; j < 4; ++j) {
      for (std::int64_t i = 0; i < 4; ++i) {
        if (rng() % 10 == 0) ev.bad[1].insert({i, j});
      }
    }
    const SchemeBox box{2, 0, 0, 1 + static_cast<std::int64_t>(t % 2), 1};
    const GoodMap a = simulate_scheme(p, box, ev.seed(), ev.aux());
    EventTable flipped = ev;
    const int level = static_cast<int>(rng() % 2);
    if (!flipped.bad[static_cast<std::size_t>(level)].empty()) {
      auto it = flipped.bad[static_cast<std::size_t>(level)].begin();
      std::advance(it, static_cast<long>(rng() % flipped.bad[static_cast<std::size_t>(level)].size()));
      flipped.bad[static_cast<std::size_t>(level)].erase(it);
    }
    const GoodMap b = simulate_scheme(p, box, flipped.seed(), flipped.aux(), 2);
    for (int n = 0; n <= 2; ++n) {
      const auto& ga = a.level(n).good;
      const auto& gb = b.level(n).good;
      for (std::size_t s = 0; s < ga.size(); ++s) CHECK(ga[s] <= gb[s]);
    }
    // Parallel evaluation matches the serial one.
    const GoodMap c = simulate_scheme(p, box, ev.seed(), ev.aux(), 3);
    for (int n = 0; n <= 2; ++n) CHECK(c.level(n).good == a.level(n).good);
  }
}

TEST_CASE("good map helpers and records") {
  const SchemeParams p = desk_params(4, 1, 2);
  std::set<Cell> bad{{0, 0}, {4, 0}};
  const auto seed = [&](std::int64_t x, std::int64_t y) { return !bad.count({x, y}); };
  const auto aux = [](int, std::int64_t, std::int64_t) { return true; };
  const GoodMap g = simulate_scheme(p, {2, 0, 0, 1, 1}, seed, aux);
  CHECK(g.parent(0, 5, 3) == std::array<std::int64_t, 2>{1, 0});
  CHECK(g.parent(0, -1, -4) == std::array<std::int64_t, 2>{-1, -1});
  CHECK_FALSE(g.good_up_to(0, 0, 0, 2));
  CHECK(g.good_up_to(0, 1, 0, 2));
  CHECK(g.good_up_to(0, 9, 9, 2));
  CHECK_THROWS_AS(g.good(0, 16, 0), Error);
  CHECK_THROWS_AS(g.good_up_to(0, 1, 1, 3), Error);

  const auto recs = g.to_records();
  REQUIRE(recs.size() == 6);
  CHECK(recs[0].header.kind == GridKind::GoodMap);
  CHECK(recs[1].header.kind == GridKind::Mask);
  CHECK(recs[2].header.tag == 1);
  CHECK(recs[4].header.geometry.h == 16.0);
  CHECK(recs[0].values[0] == 0.0);
  CHECK(recs[0].values[1] == 1.0);
}

TEST_CASE("shadow seed predicate") {
  ShadowField s;
  s.geometry = {{0.0, 0.0}, 1.0, 6, 4};
  s.alpha.assign(24, 0.1);
  s.valid.assign(24, 1);
  s.alpha[2 * 6 + 3] = 0.5;
  s.valid[5] = 0;
  const SeedPredicate pred = shadow_seed_predicate(s, 0.2, 1);
  CHECK(pred(0, 0));
  CHECK_FALSE(pred(2, 1));
  CHECK_FALSE(pred(3, 2));
  CHECK_FALSE(pred(4, 0));
  CHECK_FALSE(pred(5, 0));
  CHECK_FALSE(pred(-1, 0));
  CHECK(shadow_seed_predicate(s, 0.5, 1)(2, 1));
}

TEST_CASE("path extraction on an all-good map") {
  const SchemeParams p = desk_params(5, 1, 1);
  const auto yes = [](std::int64_t, std::int64_t) { return true; };
  const auto aux = [](int, std::int64_t, std::int64_t) { return true; };
  const GoodMap g = simulate_scheme(p, {1, 0, 0, 3, 3}, yes, aux);
  const LatticePath coarse{1, {{0, 0}, {1, 0}, {1, 1}, {1, 2}, {0, 2}}};
  const ExtractedPath e = extract_path(g, coarse, 1);
  CHECK(e.path.level == 0);
  CHECK(e.face_certificate);
  CHECK(e.min_face_fraction == 1.0);
  const auto& pts = e.path.points;
  REQUIRE_FALSE(pts.empty());
  for (std::size_t k = 1; k < pts.size(); ++k) {
    CHECK(std::abs(pts[k][0] - pts[k - 1][0]) + std::abs(pts[k][1] - pts[k - 1][1]) == 1);
  }
  CHECK(fdiv(pts.front()[0], 5) == 0);
  CHECK(fdiv(pts.front()[1], 5) == 0);
  CHECK(fdiv(pts.back()[0], 5) == 0);
  CHECK(fdiv(pts.back()[1], 5) == 2);

  const ExtractedPath single = extract_path(g, {1, {{2, 2}}}, 1);
  REQUIRE(single.path.points.size() == 1);
  CHECK(fdiv(single.path.points[0][0], 5) == 2);

  CHECK_THROWS_AS(extract_path(g, {1, {{0, 0}, {1, 1}}}, 1), ExtractionError);
  CHECK_THROWS_AS(extract_path(g, {1, {{0, 0}, {0, 3}}}, 1), Error);
  CHECK_THROWS_AS(extract_path(g, {1, {}}, 1), Error);
  CHECK_THROWS_AS(extract_path(g, {0, {{0, 0}}}, 1), Error);
  CHECK_THROWS_AS(extract_path(g, {1, {{0, 0}}}, 2), Error);
}

TEST_CASE("path extraction reports the offending cell") {
  const SchemeParams p = desk_params(8, 1, 1);
  std::set<Cell> bad{{8, 8}, {15, 8}};
  const auto seed = [&](std::int64_t x, std::int64_t y) { return !bad.count({x, y}); };
  const auto aux = [](int, std::int64_t, std::int64_t) { return true; };
  const GoodMap g = simulate_scheme(p, {1, 0, 0, 2, 2}, seed, aux);
  CHECK_FALSE(g.good(1, 1, 1));
  try {
    extract_path(g, {1, {{0, 1}, {1, 1}}}, 1);
    FAIL("expected an extraction error");
  } catch (const ExtractionError& e) {
    CHECK(e.level() == 1);
    CHECK(e.i() == 1);
    CHECK(e.j() == 1);
  }
}

TEST_CASE("randomized extraction through two levels") {
  // mu = 12 leaves room on every face for two boxes of side 5.
  const std::int64_t mu = 12;
  const SchemeParams p = desk_params(mu, 1, 2);
  std::mt19937_64 rng(33);
  for (int t = 0; t < 100; ++t) {
    const std::int64_t W = 3;
    EventTable ev;
    ev.lambda = {1, mu, mu * mu};
    ev.bad.resize(3);
    std::vector<std::vector<IndexBox>> boxes(3);
    for (std::int64_t J = 0; J < W; ++J) {
      for (std::int64_t I = 0; I < W; ++I) {
        const IndexBox b = random_box(rng, I, J, mu, 5);
        boxes[1].push_back(b);
        add_box(ev.bad[1], b);
      }
    }
    for (std::int64_t J = 0; J < W * mu; ++J) {
      for (std::int64_t I = 0; I < W * mu; ++I) {
        if (rng() % 3 == 0) continue;
        const IndexBox b = random_box(rng, I, J, mu, 5);
        boxes[0].push_back(b);
        add_box(ev.bad[0], b);
      }
    }
    const GoodMap g = simulate_scheme(p, {2, 0, 0, W, W}, ev.seed(), ev.aux());

    // Random nearest-neighbour walk of level-2 cells.
    LatticePath coarse{2, {{std::int64_t(rng() % W), std::int64_t(rng() % W)}}};
    const std::size_t steps = 1 + rng() % 6;
    while (coarse.points.size() <= steps) {
      auto q = coarse.points.back();
      const int d = static_cast<int>(rng() % 4);
      q[d / 2] += d % 2 ? 1 : -1;
      if (q[0] < 0 || q[1] < 0 || q[0] >= W || q[1] >= W) continue;
      coarse.points.push_back(q);
    }
    const ExtractedPath mid = extract_path(g, coarse, 2);
    const ExtractedPath fine = extract_path(g, mid.path, 2);
    CHECK(fine.path.level == 0);

    // Independent validation of both stages.
    for (const auto* stage : {&mid, &fine}) {
      const auto& pts = stage->path.points;
      const int lev = stage->path.level;
      const LatticePath& from = stage == &mid ? coarse : mid.path;
      REQUIRE_FALSE(pts.empty());
      bool ok = true;
      for (std::size_t k = 1; k < pts.size(); ++k) {
        ok = ok && std::abs(pts[k][0] - pts[k - 1][0]) + std::abs(pts[k][1] - pts[k - 1][1]) == 1;
      }
      CHECK(ok);
      CHECK(fdiv(pts.front()[0], mu) == from.points.front()[0]);
      CHECK(fdiv(pts.front()[1], mu) == from.points.front()[1]);
      CHECK(fdiv(pts.back()[0], mu) == from.points.back()[0]);
      CHECK(fdiv(pts.back()[1], mu) == from.points.back()[1]);
      for (const auto& q : pts) {
        // Good up to scale 2 read from the generated events directly.
        bool good = !ev.bad[static_cast<std::size_t>(lev)].count({q[0], q[1]});
        if (lev == 0) good = good && !ev.bad[1].count({fdiv(q[0], mu), fdiv(q[1], mu)});
        CHECK(good);
        for (const IndexBox& b : boxes[static_cast<std::size_t>(lev)]) CHECK_FALSE(b.contains(q[0], q[1]));
      }
      // Flood fill over the path's points reaches the last point.
      std::set<Cell> cells;
      for (const auto& q : pts) cells.insert({q[0], q[1]});
      std::set<Cell> seen{{pts.front()[0], pts.front()[1]}};
      std::deque<Cell> queue{{pts.front()[0], pts.front()[1]}};
      while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        const Cell nb[4] = {{c.first + 1, c.second}, {c.first - 1, c.second},
                            {c.first, c.second + 1}, {c.first, c.second - 1}};
        for (const Cell& n : nb) {
          if (cells.count(n) && seen.insert(n).second) queue.push_back(n);
        }
      }
      CHECK(seen.count({pts.back()[0], pts.back()[1]}) == 1);
    }
  }
}

TEST_CASE("bootstrap certificate") {
  BootstrapInputs in;
  in.lambda0 = 100.0;
  const BootstrapCert bc = bootstrap_cert(in);
  CHECK(bc.all_pass());
  CHECK(bc.delta == 0.75);
  CHECK(bc.gamma == doctest::Approx(0.25));
  for (int n = 0; n <= in.levels; ++n) {
    CHECK(bc.log2_u[static_cast<std::size_t>(n)] <= -std::ldexp(1.0, n) * (1.0 - 1e-9));
  }
  for (std::size_t n = 0; n + 1 < bc.ell.size(); ++n) {
    CHECK(bc.ell[n] < bc.ell[n + 1]);
    CHECK(bc.ell[n + 1] < in.ell_prime);
    CHECK(bc.ell[n] > in.ell);
    CHECK(bc.lambda[n + 1] == 2.0 * bc.lambda[n] + std::pow(bc.lambda[n], bc.delta));
  }
  CHECK(bc.lambda_converges);
  CHECK(bc.growth_constant > 0.0);
  CHECK(bc.growth_tail < 1e-2 * bc.growth_constant);

  // lambda_0 = 10 with delta = 0.9 (b = 1.25): lambda_n / 2^n converges.
  BootstrapInputs slow;
  slow.b = 1.25;
  slow.lambda0 = 10.0;
  slow.levels = 200;
  const BootstrapCert sc = bootstrap_cert(slow);
  CHECK(sc.delta == doctest::Approx(0.9));
  CHECK(sc.lambda_converges);
  // The tail bound at N = 150 covers everything that happens up to 200.
  slow.levels = 150;
  const BootstrapCert early = bootstrap_cert(slow);
  CHECK(early.lambda_converges);
  CHECK(sc.growth_constant >= early.growth_constant);
  CHECK(sc.growth_constant - early.growth_constant <= early.growth_tail);
  CHECK(sc.growth_tail < early.growth_tail);

  BootstrapInputs glue = in;
  glue.lambda0 = 10.0;
  const BootstrapCert gc = bootstrap_cert(glue);
  CHECK_FALSE(gc.all_pass());

  BootstrapInputs weak = in;
  weak.C1 = 0.02;
  CHECK_FALSE(bootstrap_cert(weak).all_pass());

  BootstrapInputs e = in;
  e.b = 1.0;
  CHECK_THROWS_AS(bootstrap_cert(e), Error);
  e = in;
  e.u0 = 1.0;
  CHECK_THROWS_AS(bootstrap_cert(e), Error);
  e = in;
  e.ell_prime = e.ell;
  CHECK_THROWS_AS(bootstrap_cert(e), Error);
  e = in;
  e.lambda0 = 3.0;
  e.u0 = 1e-6;
  CHECK_THROWS_AS(bootstrap_cert(e), Error);
}

TEST_CASE("log-linear arithmetic") {
  const LogLinear a = LogLinear(Rational(1, 2)) + LogLinear::basis(1, 3);
  const LogLinear b = Rational(2) * a - LogLinear::basis(1, 6);
  CHECK(b == LogLinear(1));
  CHECK(b.slots() == 0);
  CHECK(a.coefficient(0) == 0);
  CHECK(a.coefficient(1) == 3);
  CHECK(a.evaluate(std::vector<double>{5.0, 2.0}) == 6.5);
  CHECK(a.nonnegative_certified());
  CHECK_FALSE((LogLinear(1) - LogLinear::basis(0)).nonnegative_certified());
}
