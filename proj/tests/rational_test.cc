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

#include "ppoff/rational.h"

#include <gtest/gtest.h>

#include <stdexcept>
#include <unordered_set>

namespace ppoff {
namespace {

TEST(RationalTest, NormalizesSignAndCommonFactors) {
  EXPECT_EQ(Rational(2, 4), Rational(1, 2));
  EXPECT_EQ(Rational(3, -6), Rational(-1, 2));
  EXPECT_EQ(Rational(-3, -6).num(), 1);
  EXPECT_EQ(Rational(0, 7).den(), 1);
}

TEST(RationalTest, Arithmetic) {
  EXPECT_EQ(Rational(1, 3) + Rational(1, 6), Rational(1, 2));
  EXPECT_EQ(Rational(1, 3) - Rational(1, 2), Rational(-1, 6));
  EXPECT_EQ(Rational(2, 3) * Rational(9, 4), Rational(3, 2));
  EXPECT_EQ(Rational(2, 3) / Rational(4, 9), Rational(3, 2));
  EXPECT_EQ(-Rational(5, 7), Rational(-5, 7));
}

TEST(RationalTest, Ordering) {
  EXPECT_LT(Rational(1, 3), Rational(1, 2));
  EXPECT_GT(Rational(-1, 3), Rational(-1, 2));
  EXPECT_EQ(max(Rational(1, 3), Rational(2, 5)), Rational(2, 5));
  EXPECT_EQ(min(Rational(1, 3), Rational(2, 5)), Rational(1, 3));
}

TEST(RationalTest, FloorAndCeil) {
  EXPECT_EQ(Rational(7, 2).floor(), 3);
  EXPECT_EQ(Rational(7, 2).ceil(), 4);
  EXPECT_EQ(Rational(-1, 2).floor(), -1);
  EXPECT_EQ(Rational(-1, 2).ceil(), 0);
  EXPECT_EQ(Rational(4).floor(), 4);
  EXPECT_EQ(Rational(4).ceil(), 4);
}

TEST(RationalTest, ParsesIntegersFractionsAndDecimals) {
  EXPECT_EQ(Rational::parse("3"), Rational(3));
  EXPECT_EQ(Rational::parse("-2/5"), Rational(-2, 5));
  EXPECT_EQ(Rational::parse("1.25"), Rational(5, 4));
  EXPECT_EQ(Rational::parse("1e-3"), Rational(1, 1000));
  EXPECT_EQ(Rational::parse("0.1"), Rational(1, 10));
  EXPECT_THROW(Rational::parse("abc"), std::invalid_argument);
  EXPECT_THROW(Rational::parse("1/0"), std::invalid_argument);
  EXPECT_THROW(Rational(1, 0), std::domain_error);
}

TEST(RationalTest, ToStringRoundTrips) {
  for (std::int64_t n = -12; n <= 12; ++n)
    for (std::int64_t d = 1; d <= 9; ++d) {
      Rational r(n, d);
      EXPECT_EQ(Rational::parse(r.to_string()), r) << r.to_string();
    }
  EXPECT_EQ(Rational(6, 3).to_string(), "2");
  EXPECT_EQ(Rational(-3, 4).to_string(), "-3/4");
}

TEST(RationalTest, FromDoubleSnapsToGrid) {
  EXPECT_EQ(Rational::from_double(0.1, 1000), Rational(1, 10));
  EXPECT_EQ(Rational::from_double(0.1234, 100), Rational(3, 25));
  EXPECT_THROW(Rational::from_double(std::numeric_limits<double>::infinity()), std::domain_error);
}

TEST(RationalTest, DivisionByZeroAndOverflowThrow) {
  EXPECT_THROW(Rational(1) / Rational(0), std::domain_error);
  Rational big(std::int64_t{1} << 62);
  EXPECT_THROW(big * big, std::overflow_error);
}

TEST(RationalTest, HashAgreesWithEquality) {
  std::unordered_set<Rational> set;
  set.insert(Rational(1, 2));
  EXPECT_TRUE(set.count(Rational(2, 4)));
  EXPECT_FALSE(set.count(Rational(1, 3)));
}

}  // namespace
}  // namespace ppoff
