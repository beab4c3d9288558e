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

#include "shadowperc/loglinear.hpp"

#include <sstream>

namespace shadowperc {

LogLinear LogLinear::basis(std::size_t slot, Rational weight) {
  LogLinear v;
  v.coef_.assign(slot + 1, Rational(0));
  v.coef_[slot] = std::move(weight);
  v.trim();
  return v;
}

Rational LogLinear::coefficient(std::size_t slot) const {
  return slot < coef_.size() ? coef_[slot] : Rational(0);
}

void LogLinear::trim() {
  while (!coef_.empty() && coef_.back() == 0) coef_.pop_back();
}

LogLinear& LogLinear::operator+=(const LogLinear& o) {
  constant_ += o.constant_;
  if (coef_.size() < o.coef_.size()) coef_.resize(o.coef_.size(), Rational(0));
  for (std::size_t k = 0; k < o.coef_.size(); ++k) coef_[k] += o.coef_[k];
  trim();
  return *this;
}

LogLinear& LogLinear::operator-=(const LogLinear& o) {
  constant_ -= o.constant_;
  if (coef_.size() < o.coef_.size()) coef_.resize(o.coef_.size(), Rational(0));
  for (std::size_t k = 0; k < o.coef_.size(); ++k) coef_[k] -= o.coef_[k];
  trim();
  return *this;
}

LogLinear& LogLinear::operator*=(const Rational& s) {
  constant_ *= s;
  for (auto& c : coef_) c *= s;
  trim();
  return *this;
}

bool operator==(const LogLinear& a, const LogLinear& b) {
  return a.constant_ == b.constant_ && a.coef_ == b.coef_;
}

double LogLinear::evaluate(std::span<const double> logs) const {
  double v = constant_.convert_to<double>();
  for (std::size_t k = 0; k < coef_.size() && k < logs.size(); ++k) {
    v += coef_[k].convert_to<double>() * logs[k];
  }
  return v;
}

bool LogLinear::nonnegative_certified() const {
  if (constant_ < 0) return false;
  for (const auto& c : coef_) {
    if (c < 0) return false;
  }
  return true;
}

std::string LogLinear::to_string() const {
  std::ostringstream os;
  os << constant_;
  for (std::size_t k = 0; k < coef_.size(); ++k) {
    if (coef_[k] != 0) os << " + (" << coef_[k] << ")*L" << k;
  }
  return os.str();
}

}  // namespace shadowperc
