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

#ifndef SHADOWPERC_LOGLINEAR_HPP_
#define SHADOWPERC_LOGLINEAR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace shadowperc {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Exact value c + sum_k w_k L_k with rational c, w_k and symbolic
// logarithms L_k. Used for quantities such as log2 of a product of scale
// factors, where the recursion cancels exactly but doubles drift.
class LogLinear {
 public:
  LogLinear() = default;
  explicit LogLinear(Rational constant) : constant_(std::move(constant)) {}
  static LogLinear basis(std::size_t slot, Rational weight = 1);

  const Rational& constant() const { return constant_; }
  Rational coefficient(std::size_t slot) const;
  std::size_t slots() const { return coef_.size(); }

  LogLinear& operator+=(const LogLinear& o);
  LogLinear& operator-=(const LogLinear& o);
  LogLinear& operator*=(const Rational& s);
  friend LogLinear operator+(LogLinear a, const LogLinear& b) { return a += b; }
  friend LogLinear operator-(LogLinear a, const LogLinear& b) { return a -= b; }
  friend LogLinear operator*(const Rational& s, LogLinear a) { return a *= s; }
  friend bool operator==(const LogLinear& a, const LogLinear& b);

  // Numerical value for the given logarithms (missing slots count as 0).
  double evaluate(std::span<const double> logs) const;
  // True when the constant and every coefficient are >= 0, which proves the
  // value nonnegative whenever all L_k >= 0.
  bool nonnegative_certified() const;
  std::string to_string() const;

 private:
  void trim();

  Rational constant_ = 0;
  std::vector<Rational> coef_;
};

}  // namespace shadowperc

#endif  // SHADOWPERC_LOGLINEAR_HPP_
