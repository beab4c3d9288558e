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

#include "shadowperc/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "shadowperc/parallel.hpp"

namespace shadowperc {
namespace {

double up(double x) { return std::isinf(x) ? x : std::nextafter(x, kInf); }
double down(double x) { return std::isinf(x) ? x : std::nextafter(x, -kInf); }

double log2_up(double x) {
  int e = 0;
  if (std::frexp(x, &e) == 0.5) return static_cast<double>(e - 1);  // exact
  return up(up(std::log2(x)));
}

// log2(2^a + 2^b) rounded towards +inf (upward = true) or -inf.
double log2_add(double a, double b, bool upward) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  const double s = std::min(a, b);
  auto r = [&](double v) { return upward ? up(v) : down(v); };
  const double e = r(r(std::exp2(r(s - m))));
  const double l = r(r(r(std::log1p(e)) / std::numbers::ln2));
  return r(m + l);
}

std::string int_list(const std::vector<std::int64_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::int64_t to_int64(const BigInt& v, const char* what) {
  if (v > std::numeric_limits<std::int64_t>::max() ||
      v < std::numeric_limits<std::int64_t>::min()) {
    throw BudgetError(std::string(what) + " does not fit in 64 bits");
  }
  return v.convert_to<std::int64_t>();
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::vector<std::int64_t> EventuallyConstant::terms() const {
  std::vector<std::int64_t> t = prefix;
  t.push_back(tail);
  return t;
}

EventuallyConstant EventuallyConstant::parse(const std::string& text) {
  std::vector<std::int64_t> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long x = 0;
    try {
      x = std::stoll(item, &used);
    } catch (const std::exception&) {
      throw Error("not an integer sequence: " + text);
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) {
      throw Error("not an integer sequence: " + text);
    }
    v.push_back(x);
  }
  if (v.empty()) throw Error("empty integer sequence");
  EventuallyConstant s;
  s.tail = v.back();
  v.pop_back();
  s.prefix = std::move(v);
  return s;
}

std::string EventuallyConstant::to_string() const { return int_list(terms()); }

BigInt SchemeParams::lambda(int n) const {
  BigInt l = lambda0;
  for (int k = 0; k < n; ++k) l *= mu.at(static_cast<std::size_t>(k));
  return l;
}

int scale_index(const SchemeParams& params, const BigInt& lambda, bool strict) {
  int best = -1;
  BigInt ln = params.lambda0;
  for (int n = 0; n <= params.levels; ++n) {
    if (strict ? ln < lambda : ln <= lambda) {
      best = n;
    } else {
      break;
    }
    ln *= params.mu.at(static_cast<std::size_t>(n));
  }
  return best;
}

Verdict check_c1(const EventuallyConstant& mu, const EventuallyConstant& sigma) {
  Verdict v{"C1: mu_n >= 100 sigma_n and sigma_n >= 2", true, "holds for every n"};
  const std::size_t span = std::max(mu.prefix.size(), sigma.prefix.size());
  for (std::size_t n = 0; n <= span; ++n) {
    const BigInt m = mu.at(n);
    const BigInt s = sigma.at(n);
    std::ostringstream os;
    if (s < 2) {
      os << "sigma_" << n << " = " << s << " < 2";
    } else if (m < 100 * s) {
      os << "mu_" << n << " = " << m << " < 100 sigma_" << n << " = " << 100 * s;
    } else {
      continue;
    }
    v.pass = false;
    v.detail = os.str() + (n == span ? " (and for every later n)" : "");
    return v;
  }
  return v;
}

std::vector<double> log2_slots(const EventuallyConstant& mu) {
  std::vector<double> out;
  for (std::int64_t m : mu.terms()) {
    out.push_back(m >= 1 ? log2_up(static_cast<double>(m)) : kNaN);
  }
  return out;
}

C3Result check_c3(const EventuallyConstant& mu) {
  C3Result r;
  r.verdict = {"C3: sum log2(mu_n) / 2^n < inf", true, ""};
  for (std::int64_t m : mu.terms()) {
    if (m < 1) {
      r.verdict.pass = false;
      r.verdict.detail = "mu must be a sequence of positive integers";
      return r;
    }
  }
  const std::size_t P = mu.prefix.size();
  Rational w = 1;
  for (std::size_t k = 0; k < P; ++k) {
    r.exact += LogLinear::basis(k, w);
    w /= 2;
  }
  r.exact += LogLinear::basis(P, 2 * w);  // geometric tail sum_{k >= P} 2^-k
  r.value = r.exact.evaluate(log2_slots(mu));
  std::ostringstream os;
  os.precision(17);
  os << "eventually constant; limit = " << r.value;
  r.verdict.detail = os.str();
  return r;
}

LogLinear sigma0_exact(int d, const EventuallyConstant& mu) {
  const C3Result c3 = check_c3(mu);
  if (!c3.verdict.pass) throw Error(c3.verdict.detail);
  return LogLinear(1) + Rational(d) * c3.exact;
}

double log2_epsilon0_of(double sigma0) {
  return std::log2(0.99) + std::min(-std::log2(2.0 + sigma0), -sigma0 - 1.0);
}

bool CertBounds::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

CertBounds epsilon0(const SchemeParams& params) {
  if (params.d < 2) throw Error("dimension d must be at least 2");
  if (params.levels < 0) throw Error("level cap must be nonnegative");
  const Verdict c1 = check_c1(params.mu, params.sigma);
  if (!c1.pass) throw Error("condition C1 fails: " + c1.detail);
  const C3Result c3 = check_c3(params.mu);
  if (!c3.verdict.pass) throw Error("condition C3 fails: " + c3.verdict.detail);

  CertBounds cb;
  cb.d = params.d;
  cb.verdicts.push_back(c1);
  cb.verdicts.push_back(c3.verdict);
  const std::vector<double> L = log2_slots(params.mu);
  const Rational d = params.d;

  cb.sigma0_exact = sigma0_exact(params.d, params.mu);
  cb.sigma0 = cb.sigma0_exact.evaluate(L);

  cb.log2_a_exact.push_back(cb.sigma0_exact);
  for (int n = 1; n <= params.levels; ++n) {
    const auto slot = params.mu.slot(static_cast<std::size_t>(n - 1));
    cb.log2_a_exact.push_back(Rational(2) * cb.log2_a_exact.back() - LogLinear(1) -
                              LogLinear::basis(slot, 2 * d));
  }
  cb.claim_a_holds = true;
  Rational pow2 = 1;
  for (const auto& a : cb.log2_a_exact) {
    cb.log2_a.push_back(a.evaluate(L));
    const bool lower = a.nonnegative_certified();
    const bool upper = (pow2 * cb.sigma0_exact - a).nonnegative_certified();
    cb.claim_a_holds = cb.claim_a_holds && lower && upper;
    pow2 *= 2;
  }
  cb.verdicts.push_back({"claim: 0 <= log2 a_n <= 2^n log2 a_0", cb.claim_a_holds,
                         "checked coefficientwise in exact arithmetic for n <= " +
                             std::to_string(params.levels)});

  cb.log2_epsilon0 = log2_epsilon0_of(cb.sigma0);
  cb.epsilon0 = std::exp2(cb.log2_epsilon0);
  return cb;
}

CertBounds iterate_pn(const SchemeParams& params, double log2_p0, double epsilon,
                      const AuxBound& aux) {
  CertBounds cb = epsilon0(params);
  if (!(epsilon > 0.0)) throw Error("auxiliary-bound epsilon must be positive");
  cb.epsilon = epsilon;
  cb.log2_p0 = log2_p0;
  {
    std::ostringstream os;
    os.precision(17);
    os << "epsilon = " << epsilon << ", epsilon0 = " << cb.epsilon0;
    cb.verdicts.push_back({"epsilon <= epsilon0", epsilon <= cb.epsilon0, os.str()});
  }
  {
    std::ostringstream os;
    os.precision(17);
    os << "log2 p0 = " << log2_p0 << ", log2 epsilon = " << std::log2(epsilon);
    cb.verdicts.push_back({"p0 < epsilon", log2_p0 < std::log2(epsilon), os.str()});
  }

  const std::vector<double> L = log2_slots(params.mu);
  const double two_d = 2.0 * params.d;
  cb.log2_aux.assign(1, kNaN);
  cb.log2_p.assign(1, log2_p0);
  cb.level_pass.assign(1, log2_p0 <= -1.0 ? 1 : 0);
  cb.level_pass_strong.assign(
      1, log2_p0 <= down(-1.0 - cb.log2_a[0]) ? 1 : 0);
  cb.levels_reached = 0;
  bool all = cb.level_pass[0] != 0;
  for (int n = 1; n <= params.levels; ++n) {
    if (n > 1023) break;  // 2^n is no longer a finite double
    const double two_n = std::ldexp(1.0, n);
    const double b = aux ? aux(n) : up(-(two_n / epsilon));
    const double Lm = L[params.mu.slot(static_cast<std::size_t>(n - 1))];
    const double growth = up(up(two_d * Lm) + 2.0 * cb.log2_p.back());
    const double x = log2_add(b, growth, true);
    cb.log2_aux.push_back(b);
    cb.log2_p.push_back(x);
    const bool pass = x <= -two_n;
    cb.level_pass.push_back(pass ? 1 : 0);
    cb.level_pass_strong.push_back(x <= down(-two_n - cb.log2_a[static_cast<std::size_t>(n)]) ? 1 : 0);
    cb.levels_reached = n;
    all = all && pass;
  }
  std::ostringstream os;
  os << "levels 0.." << cb.levels_reached;
  if (cb.levels_reached < params.levels) os << " (stopped: 2^n not representable beyond)";
  cb.verdicts.push_back({"p_n <= 2^(-2^n)", all && cb.levels_reached == params.levels, os.str()});
  return cb;
}

std::vector<BigInt> FormalSupport::lo() const {
  std::vector<BigInt> v;
  for (const auto& x : u) v.push_back(x - half_width);
  return v;
}

std::vector<BigInt> FormalSupport::hi() const {
  std::vector<BigInt> v;
  for (const auto& x : u) v.push_back(x + half_width);
  return v;
}

FormalSupport formal_support(const SchemeParams& params, int n, std::vector<BigInt> u) {
  if (n < 0) throw Error("level must be nonnegative");
  if (u.size() != static_cast<std::size_t>(params.d)) {
    throw Error("point dimension does not match d");
  }
  FormalSupport fs;
  fs.level = n;
  const BigInt ln = params.lambda(n);
  for (const auto& x : u) {
    if (x % ln != 0) throw Error("point is not on the level-n lattice");
  }
  fs.u = std::move(u);
  auto sl = [&](int k) { return BigInt(params.sigma.at(static_cast<std::size_t>(k))) * params.lambda(k); };
  fs.recursive_lo = -sl(0);
  fs.recursive_hi = sl(0);
  fs.inclusion_certified = true;
  for (int k = 1; k <= n; ++k) {
    const BigInt lk = params.lambda(k);
    const BigInt lprev = params.lambda(k - 1);
    const BigInt lhs = lk + 2 * sl(k - 1);
    const BigInt rhs = 2 * sl(k);
    Verdict step;
    step.name = "lambda_" + std::to_string(k) + " + 2 sigma_" + std::to_string(k - 1) +
                " lambda_" + std::to_string(k - 1) + " <= 2 sigma_" + std::to_string(k) +
                " lambda_" + std::to_string(k);
    step.pass = lhs <= rhs;
    std::ostringstream os;
    os << lhs << (step.pass ? " <= " : " > ") << rhs;
    step.detail = os.str();
    fs.steps.push_back(step);
    fs.inclusion_certified = fs.inclusion_certified && step.pass;
    fs.recursive_lo = std::min(BigInt(-sl(k)), BigInt(fs.recursive_lo));
    fs.recursive_hi = std::max(BigInt(sl(k)), BigInt(lk - lprev + fs.recursive_hi));
  }
  fs.half_width = n == 0 ? sl(0) : BigInt(2 * sl(n));
  fs.inclusion_certified = fs.inclusion_certified && fs.recursive_lo >= -fs.half_width &&
                           fs.recursive_hi <= fs.half_width;
  return fs;
}

bool supports_disjoint(const FormalSupport& a, const FormalSupport& b) {
  const auto alo = a.lo(), ahi = a.hi(), blo = b.lo(), bhi = b.hi();
  for (std::size_t k = 0; k < alo.size(); ++k) {
    if (ahi[k] < blo[k] || bhi[k] < alo[k]) return true;
  }
  return false;
}

GoodMap::GoodMap(SchemeParams params, std::vector<LevelMap> levels, bool c1_holds)
    : params_(std::move(params)), levels_(std::move(levels)), c1_holds_(c1_holds) {}

bool GoodMap::good(int n, std::int64_t i, std::int64_t j) const {
  if (n < 0 || n > top_level()) throw Error("level outside the good map");
  const LevelMap& lv = level(n);
  if (!lv.contains(i, j)) {
    throw Error("point (" + std::to_string(i) + ", " + std::to_string(j) +
                ") of level " + std::to_string(n) + " lies outside the good map");
  }
  return lv.good[lv.index(i, j)] != 0;
}

std::array<std::int64_t, 2> GoodMap::parent(int n, std::int64_t i, std::int64_t j) const {
  const std::int64_t m = params_.mu.at(static_cast<std::size_t>(n));
  return {floor_div(i, m), floor_div(j, m)};
}

bool GoodMap::good_up_to(int m, std::int64_t i, std::int64_t j, int n) const {
  if (n > top_level()) throw Error("good map does not reach the requested scale");
  for (int k = m; k <= n; ++k) {
    if (!good(k, i, j)) return false;
    if (k < n) {
      const auto p = parent(k, i, j);
      i = p[0];
      j = p[1];
    }
  }
  return true;
}

std::vector<GridRecord> GoodMap::to_records() const {
  std::vector<GridRecord> recs;
  for (const LevelMap& lv : levels_) {
    GridRecord g;
    g.header.kind = GridKind::GoodMap;
    g.header.tag = static_cast<std::uint32_t>(lv.level);
    const double l = static_cast<double>(lv.lambda);
    g.header.geometry = {{l * static_cast<double>(lv.i0), l * static_cast<double>(lv.j0)},
                         l,
                         static_cast<std::size_t>(lv.ni),
                         static_cast<std::size_t>(lv.nj)};
    g.values.assign(lv.good.begin(), lv.good.end());
    GridRecord e = g;
    e.header.kind = GridKind::Mask;
    e.values.assign(lv.event.begin(), lv.event.end());
    recs.push_back(std::move(g));
    recs.push_back(std::move(e));
  }
  return recs;
}

GoodMap simulate_scheme(const SchemeParams& params, const SchemeBox& box,
                        const SeedPredicate& seed, const AuxPredicate& aux,
                        unsigned workers) {
  if (box.level < 0) throw Error("scheme box level must be nonnegative");
  if (box.ni < 1 || box.nj < 1) {
    throw Error("box too small for any level-" + std::to_string(box.level) + " cell");
  }
  if (!seed || (box.level > 0 && !aux)) throw Error("seed and auxiliary predicates are required");
  const int top = box.level;
  std::vector<LevelMap> levels(static_cast<std::size_t>(top + 1));
  BigInt cells = 0;
  for (int n = top; n >= 0; --n) {
    LevelMap& lv = levels[static_cast<std::size_t>(n)];
    lv.level = n;
    lv.lambda = to_int64(params.lambda(n), "lambda_n");
    if (n == top) {
      lv.i0 = box.i0;
      lv.j0 = box.j0;
      lv.ni = box.ni;
      lv.nj = box.nj;
    } else {
      const LevelMap& up_lv = levels[static_cast<std::size_t>(n + 1)];
      const std::int64_t m = params.mu.at(static_cast<std::size_t>(n));
      if (m < 1) throw Error("mu must be positive");
      lv.i0 = up_lv.i0 * m;
      lv.j0 = up_lv.j0 * m;
      lv.ni = up_lv.ni * m;
      lv.nj = up_lv.nj * m;
    }
    cells += BigInt(lv.ni) * lv.nj;
  }
  if (cells > BigInt(1) << 28) throw BudgetError("good map needs more than 2^28 cells");
  for (auto& lv : levels) {
    lv.event.assign(static_cast<std::size_t>(lv.ni * lv.nj), 0);
    lv.good.assign(lv.event.size(), 0);
  }

  LevelMap& l0 = levels[0];
  parallel_for(static_cast<std::size_t>(l0.nj), workers, [&](std::size_t r) {
    const std::int64_t j = l0.j0 + static_cast<std::int64_t>(r);
    for (std::int64_t i = l0.i0; i < l0.i0 + l0.ni; ++i) {
      const bool e = seed(i * l0.lambda, j * l0.lambda);
      l0.event[l0.index(i, j)] = e;
      l0.good[l0.index(i, j)] = e;
    }
  });
  for (int n = 1; n <= top; ++n) {
    LevelMap& lv = levels[static_cast<std::size_t>(n)];
    const LevelMap& child = levels[static_cast<std::size_t>(n - 1)];
    const std::int64_t m = params.mu.at(static_cast<std::size_t>(n - 1));
    const std::int64_t reach = 5 * params.sigma.at(static_cast<std::size_t>(n - 1));
    parallel_for(static_cast<std::size_t>(lv.nj), workers, [&](std::size_t r) {
      const std::int64_t J = lv.j0 + static_cast<std::int64_t>(r);
      for (std::int64_t I = lv.i0; I < lv.i0 + lv.ni; ++I) {
        const bool e = aux(n, I * lv.lambda, J * lv.lambda);
        std::int64_t lo_i = std::numeric_limits<std::int64_t>::max(), hi_i = std::numeric_limits<std::int64_t>::min();
        std::int64_t lo_j = lo_i, hi_j = hi_i;
        bool any_bad = false;
        for (std::int64_t b = 0; b < m; ++b) {
          for (std::int64_t a = 0; a < m; ++a) {
            const std::int64_t ci = I * m + a, cj = J * m + b;
            if (child.good[child.index(ci, cj)]) continue;
            any_bad = true;
            lo_i = std::min(lo_i, ci);
            hi_i = std::max(hi_i, ci);
            lo_j = std::min(lo_j, cj);
            hi_j = std::max(hi_j, cj);
          }
        }
        const bool clustered = !any_bad || std::max(hi_i - lo_i, hi_j - lo_j) < reach;
        lv.event[lv.index(I, J)] = e;
        lv.good[lv.index(I, J)] = e && clustered;
      }
    });
  }
  return GoodMap(params, std::move(levels), check_c1(params.mu, params.sigma).pass);
}

SeedPredicate shadow_seed_predicate(const ShadowField& shadow, double ell,
                                    std::int64_t lambda0) {
  const GridGeometry g = shadow.geometry;
  const auto ox = static_cast<std::int64_t>(std::llround(g.origin.x));
  const auto oy = static_cast<std::int64_t>(std::llround(g.origin.y));
  return [&shadow, ell, lambda0, ox, oy](std::int64_t x, std::int64_t y) {
    const GridGeometry& gg = shadow.geometry;
    for (std::int64_t b = 0; b <= lambda0; ++b) {
      for (std::int64_t a = 0; a <= lambda0; ++a) {
        const std::int64_t i = x + a - ox, j = y + b - oy;
        if (i < 0 || j < 0 || i >= static_cast<std::int64_t>(gg.nx) ||
            j >= static_cast<std::int64_t>(gg.ny)) {
          return false;
        }
        const auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
        if (!shadow.is_valid(si, sj) || !(shadow.at(si, sj) <= ell)) return false;
      }
    }
    return true;
  };
}

ExtractedPath extract_path(const GoodMap& map, const LatticePath& coarse, int n) {
  const int m = coarse.level;
  if (m < 1) throw Error("path extraction needs a coarse level m >= 1");
  if (n < m) throw Error("scale n must be at least the coarse level");
  if (n > map.top_level()) throw Error("good map does not reach scale n");
  if (coarse.points.empty()) throw Error("coarse path is empty");
  const std::int64_t mu = map.params().mu.at(static_cast<std::size_t>(m - 1));
  const std::int64_t reach = 5 * map.params().sigma.at(static_cast<std::size_t>(m - 1));
  const LevelMap& fine = map.level(m - 1);

  ExtractedPath out;
  out.path.level = m - 1;
  for (std::size_t k = 0; k < coarse.points.size(); ++k) {
    const auto [I, J] = coarse.points[k];
    if (k > 0) {
      const auto [pI, pJ] = coarse.points[k - 1];
      if (std::abs(I - pI) + std::abs(J - pJ) != 1) {
        throw ExtractionError("coarse path is not nearest-neighbour", m, I, J);
      }
    }
    IndexBox box;
    bool any = false;
    for (std::int64_t b = 0; b < mu; ++b) {
      for (std::int64_t a = 0; a < mu; ++a) {
        const std::int64_t ci = I * mu + a, cj = J * mu + b;
        if (!fine.contains(ci, cj)) {
          throw ExtractionError("coarse cell lies outside the good map", m, I, J);
        }
        if (fine.good[fine.index(ci, cj)]) continue;
        if (!any) {
          box = {ci, cj, ci, cj};
          any = true;
        }
        box.i0 = std::min(box.i0, ci);
        box.i1 = std::max(box.i1, ci);
        box.j0 = std::min(box.j0, cj);
        box.j1 = std::max(box.j1, cj);
      }
    }
    if (any && std::max(box.i1 - box.i0, box.j1 - box.j0) >= reach) {
      std::ostringstream os;
      os << "cell (" << I << ", " << J << ") of level " << m
         << " holds bad points that do not fit in one 5 sigma lambda box";
      throw ExtractionError(os.str(), m, I, J);
    }
    if (!map.good_up_to(m, I, J, n)) {
      std::ostringstream os;
      os << "cell (" << I << ", " << J << ") of level " << m << " is not good up to scale " << n;
      throw ExtractionError(os.str(), m, I, J);
    }
    out.bad_boxes.push_back(box);
  }

  using Pt = std::array<std::int64_t, 2>;
  auto route = [&](std::size_t k, Pt from, Pt to) {
    const auto [I, J] = coarse.points[k];
    const IndexBox& bad = out.bad_boxes[k];
    const std::int64_t bi = I * mu, bj = J * mu;
    auto local = [&](Pt p) { return static_cast<std::size_t>((p[1] - bj) * mu + (p[0] - bi)); };
    std::vector<std::int64_t> prev(static_cast<std::size_t>(mu * mu), -1);
    std::deque<Pt> q{from};
    prev[local(from)] = static_cast<std::int64_t>(local(from));
    constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    while (!q.empty() && prev[local(to)] < 0) {
      const Pt p = q.front();
      q.pop_front();
      for (int d = 0; d < 4; ++d) {
        const Pt np{p[0] + dx[d], p[1] + dy[d]};
        if (np[0] < bi || np[0] >= bi + mu || np[1] < bj || np[1] >= bj + mu) continue;
        if (bad.contains(np[0], np[1]) || prev[local(np)] >= 0) continue;
        prev[local(np)] = static_cast<std::int64_t>(local(p));
        q.push_back(np);
      }
    }
    if (prev[local(to)] < 0) {
      throw ExtractionError("no route through the cell avoiding its bad box", m, I, J);
    }
    std::vector<Pt> seg;
    for (std::size_t c = local(to);; c = static_cast<std::size_t>(prev[c])) {
      seg.push_back({bi + static_cast<std::int64_t>(c) % mu, bj + static_cast<std::int64_t>(c) / mu});
      if (prev[c] == static_cast<std::int64_t>(c)) break;
    }
    std::reverse(seg.begin(), seg.end());
    return seg;
  };

  // Crossing points between consecutive cells: exit[k] in cell k,
  // entry[k + 1] in cell k + 1, adjacent in L_{m-1}.
  const std::size_t K = coarse.points.size();
  std::vector<Pt> exit_pt(K), entry_pt(K);
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const auto [I, J] = coarse.points[k];
    const auto [nI, nJ] = coarse.points[k + 1];
    const std::int64_t dI = nI - I, dJ = nJ - J;
    std::int64_t best_t = -1;
    double best_score = kInf;
    std::int64_t usable_here = 0, usable_next = 0;
    for (std::int64_t t = 0; t < mu; ++t) {
      Pt x, y;
      if (dI != 0) {
        x = {I * mu + (dI > 0 ? mu - 1 : 0), J * mu + t};
        y = {nI * mu + (dI > 0 ? 0 : mu - 1), J * mu + t};
      } else {
        x = {I * mu + t, J * mu + (dJ > 0 ? mu - 1 : 0)};
        y = {I * mu + t, nJ * mu + (dJ > 0 ? 0 : mu - 1)};
      }
      const bool okx = !out.bad_boxes[k].contains(x[0], x[1]);
      const bool oky = !out.bad_boxes[k + 1].contains(y[0], y[1]);
      usable_here += okx;
      usable_next += oky;
      const double score = std::abs(static_cast<double>(t) - 0.5 * static_cast<double>(mu - 1));
      if (okx && oky && score < best_score) {
        best_score = score;
        best_t = t;
        exit_pt[k] = x;
        entry_pt[k + 1] = y;
      }
    }
    const double frac = static_cast<double>(std::min(usable_here, usable_next)) / static_cast<double>(mu);
    out.min_face_fraction = std::min(out.min_face_fraction, frac);
    if (best_t < 0) {
      throw ExtractionError("shared face of two coarse cells has no usable crossing", m, I, J);
    }
  }
  out.face_certificate = out.min_face_fraction >= 0.75;

  if (K == 1) {
    const auto [I, J] = coarse.points[0];
    for (std::int64_t t = 0; t < mu * mu; ++t) {
      const Pt p{I * mu + t % mu, J * mu + t / mu};
      if (!out.bad_boxes[0].contains(p[0], p[1])) {
        out.path.points.push_back(p);
        return out;
      }
    }
    throw ExtractionError("coarse cell has no good child", m, I, J);
  }
  out.path.points.push_back(exit_pt[0]);
  for (std::size_t k = 1; k < K; ++k) {
    const Pt target = k + 1 < K ? exit_pt[k] : entry_pt[k];
    const auto seg = route(k, entry_pt[k], target);
    out.path.points.insert(out.path.points.end(), seg.begin(), seg.end());
  }
  return out;
}

bool BootstrapCert::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Verdict& v) { return v.pass; });
}

BootstrapCert bootstrap_cert(const BootstrapInputs& in) {
  if (!(in.a > 0.0)) throw Error("exponent a must be positive");
  if (!(in.b > 1.0)) throw Error("exponent b must exceed 1");
  if (!(in.lambda0 > 1.0)) throw Error("lambda0 must exceed 1");
  if (!(in.ell < in.ell_prime)) throw Error("need ell < ell'");
  if (!(in.u0 > 0.0 && in.u0 < 1.0)) throw Error("u0 must lie in (0, 1)");
  if (!(in.C1 > 0.0) || !(in.c1 > 0.0)) throw Error("constants C1, c1 must be positive");
  if (in.levels < 1 || in.levels > 1000) throw Error("levels must lie in [1, 1000]");

  BootstrapCert bc;
  bc.inputs = in;
  bc.delta = (1.0 / in.b + 1.0) / 2.0;
  bc.gamma = (in.b * bc.delta - 1.0) / (2.0 * in.a);
  const double bd = in.b * bc.delta;
  bc.checks.push_back({"b delta > 1", bd > 1.0, "b delta = " + std::to_string(bd)});
  bc.checks.push_back({"b delta - a gamma > 1", bd - in.a * bc.gamma > 1.0,
                       "b delta - a gamma = " + std::to_string(bd - in.a * bc.gamma)});

  const int N = in.levels;
  bc.lambda.push_back(in.lambda0);
  for (int n = 0; n < N; ++n) {
    const double l = bc.lambda.back();
    bc.lambda.push_back(2.0 * l + std::pow(l, bc.delta));
  }
  const double spread = in.ell_prime - in.ell;
  for (double l : bc.lambda) bc.ell.push_back(in.ell_prime - spread / std::pow(l, bc.gamma));
  bool ell_ok = true, eps_ok = true, glue_ok = true;
  int glue_first_fail = -1;
  for (int n = 0; n <= N; ++n) {
    const double e = bc.ell[static_cast<std::size_t>(n)];
    ell_ok = ell_ok && e > in.ell && e < in.ell_prime;
    if (n < N) {
      const double next = bc.ell[static_cast<std::size_t>(n + 1)];
      ell_ok = ell_ok && next > e;
      const double eps = next - e;
      bc.eps.push_back(eps);
      const double bound = spread * (1.0 - std::exp2(-bc.gamma)) *
                           std::pow(bc.lambda[static_cast<std::size_t>(n)], -bc.gamma);
      eps_ok = eps_ok && eps >= bound * (1.0 - 1e-12);
      const bool glue = 5.0 * bc.lambda[static_cast<std::size_t>(n)] >=
                        2.0 * bc.lambda[static_cast<std::size_t>(n + 1)];
      if (!glue && glue_first_fail < 0) glue_first_fail = n;
      glue_ok = glue_ok && glue;
    }
  }
  bc.checks.push_back({"ell < ell_n < ell_{n+1} < ell'", ell_ok, ""});
  bc.checks.push_back({"eps_n >= (ell' - ell)(1 - 2^-gamma) lambda_n^-gamma", eps_ok, ""});
  bc.checks.push_back({"5 lambda_n >= 2 lambda_{n+1}", glue_ok,
                       glue_ok ? "" : "first fails at n = " + std::to_string(glue_first_fail)});

  // u_{n+1} <= u_n^2 follows from 49 C1 >= 2 and lambda_{n+1} >= 2 lambda_n,
  // both exact; the sequences below are reported for inspection.
  bool doubling = true;
  for (int n = 0; n < N; ++n) {
    doubling = doubling && bc.lambda[static_cast<std::size_t>(n + 1)] >= 2.0 * bc.lambda[static_cast<std::size_t>(n)];
  }
  bc.checks.push_back({"u_{n+1} <= u_n^2 (49 C1 >= 2 and lambda_{n+1} >= 2 lambda_n)",
                       49.0 * in.C1 >= 2.0 && doubling, ""});

  const double log2e = std::numbers::log2e;
  const double log2_C1 = std::log2(in.C1);
  const double log2_49 = std::log2(49.0);
  const double tail0 = in.C1 * std::exp(-in.c1 * in.lambda0 / 2.0);
  const double p0 = in.u0 / 49.0 - tail0;
  if (!(p0 >= 0.0)) {
    throw Error("u0 is below 49 C1 exp(-c1 lambda0 / 2); no nonnegative p0 matches it");
  }
  bc.log2_P.push_back(p0 > 0.0 ? std::log2(p0) : -kInf);
  for (int n = 0; n < N; ++n) {
    const double lp = bc.log2_P.back();
    const double sq = lp == -kInf ? -kInf : up(up(log2_49 + 2.0 * lp));
    const double ex = up(log2_C1 - in.c1 * bc.lambda[static_cast<std::size_t>(n)] * log2e);
    bc.log2_P.push_back(log2_add(sq, ex, true));
  }
  bool chain_ok = true;
  const double log2_u0 = std::log2(in.u0);
  for (int n = 0; n <= N; ++n) {
    const double half = up(log2_C1 - in.c1 * bc.lambda[static_cast<std::size_t>(n)] / 2.0 * log2e);
    const double lu = up(log2_49 + log2_add(bc.log2_P[static_cast<std::size_t>(n)], half, true));
    bc.log2_u.push_back(lu);
    const double target = std::ldexp(log2_u0, n);
    chain_ok = chain_ok && lu <= target + 1e-9 * std::abs(target);
  }
  bc.checks.push_back({"u_n <= u_0^(2^n)", chain_ok, "numerical, relative slack 1e-9"});

  // lambda_n / 2^n: with c = (2 + 2^(1/delta)) / 2 we have c > 2, c^delta < 2;
  // once lambda_{n+1} <= c lambda_n the increments lambda_n^delta / 2^(n+1)
  // shrink at least geometrically with ratio c^delta / 2.
  const double c = (2.0 + std::exp2(1.0 / bc.delta)) / 2.0;
  const double ratio = std::pow(c, bc.delta) / 2.0;
  int n0 = -1;
  for (int n = N - 1; n >= 0; --n) {
    if (bc.lambda[static_cast<std::size_t>(n + 1)] <= c * bc.lambda[static_cast<std::size_t>(n)]) {
      n0 = n;
    } else {
      break;
    }
  }
  auto increment = [&](int n) {
    return std::pow(bc.lambda[static_cast<std::size_t>(n)], bc.delta) / std::ldexp(1.0, n + 1);
  };
  bool geometric = n0 >= 0 && n0 < N - 1;
  for (int n = std::max(n0, 0); geometric && n + 1 < N; ++n) {
    geometric = increment(n + 1) <= ratio * increment(n) * (1.0 + 1e-12);
  }
  bc.lambda_converges = geometric;
  bc.growth_constant = bc.lambda.back() / std::ldexp(1.0, N);
  bc.growth_tail = geometric ? increment(N) / (1.0 - ratio) : kInf;
  bc.checks.push_back({"lambda_n / 2^n converges", bc.lambda_converges,
                       "C ~ " + std::to_string(bc.growth_constant)});
  return bc;
}

}  // namespace shadowperc
