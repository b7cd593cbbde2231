// Copyright 2026 The ppoff Authors
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

#ifndef PPOFF_RATIONAL_H_
#define PPOFF_RATIONAL_H_

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

namespace ppoff {

// Exact rational number with a normalized int64 numerator/denominator pair.
// All schedule time arithmetic goes through this type so that equality
// checks on makespans and bubbles are exact. Intermediate products use
// 128-bit integers; a result that does not fit in int64 throws
// std::overflow_error.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t value) : num_(value) {}  // NOLINT: implicit by design of literals
  Rational(std::int64_t num, std::int64_t den);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_integer() const { return den_ == 1; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  // Rounds `value` to the nearest multiple of 1/`grid` (default: picoseconds
  // when the unit is seconds). Keeping every double-derived quantity on one
  // grid bounds denominators when sums are formed.
  static Rational from_double(double value, std::int64_t grid = 1'000'000'000'000);

  // Parses "3", "-2/5", "1.25" or "1e-3" exactly (decimal strings are
  // converted digit by digit, not through a double).
  static Rational parse(std::string_view text);

  // "3" for integers, "p/q" otherwise. parse(to_string()) round-trips.
  std::string to_string() const;

  Rational operator-() const;
  Rational& operator+=(const Rational& o);
  Rational& operator-=(const Rational& o);
  Rational& operator*=(const Rational& o);
  Rational& operator/=(const Rational& o);

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

  // Largest integer <= this.
  std::int64_t floor() const;
  // Smallest integer >= this.
  std::int64_t ceil() const;

 private:
  static Rational from_wide(__int128 num, __int128 den);

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

std::ostream& operator<<(std::ostream& os, const Rational& r);

inline Rational max(const Rational& a, const Rational& b) { return a < b ? b : a; }
inline Rational min(const Rational& a, const Rational& b) { return b < a ? b : a; }

// Schedule time. Units are whatever the pass costs are expressed in
// (seconds when derived from the cost model, abstract units in tests).
using Time = Rational;

}  // namespace ppoff

template <>
struct std::hash<ppoff::Rational> {
  std::size_t operator()(const ppoff::Rational& r) const noexcept {
    return std::hash<std::int64_t>{}(r.num()) * 31u ^ std::hash<std::int64_t>{}(r.den());
  }
};

#endif  // PPOFF_RATIONAL_H_
