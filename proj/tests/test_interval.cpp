#include <gtest/gtest.h>

#include "pmps/interval.hpp"

using pmps::interval_add;
using pmps::ProbInterval;
using pmps::Rational;

namespace {

ProbInterval closed(const Rational& lo, const Rational& hi) {
  return ProbInterval{lo, hi, true, true};
}

}  // namespace

TEST(ProbInterval, PointConstruction) {
  auto p = ProbInterval::point(Rational(3, 10));
  EXPECT_TRUE(p.is_point());
  EXPECT_EQ(p.lo, Rational(3, 10));
  EXPECT_EQ(p.hi, Rational(3, 10));
  EXPECT_TRUE(p.lo_closed);
  EXPECT_TRUE(p.hi_closed);
  EXPECT_THROW(ProbInterval::point(Rational(11, 10)), std::domain_error);
  EXPECT_THROW(ProbInterval::point(Rational(-1, 10)), std::domain_error);
}

TEST(ProbInterval, ValidityBounds) {
  EXPECT_TRUE(closed(Rational(7, 10), Rational(9, 10)).valid());
  EXPECT_TRUE((ProbInterval{Rational(1, 5), Rational(2, 5), false, true}.valid()));
  EXPECT_FALSE(closed(Rational(9, 10), Rational(7, 10)).valid());
  EXPECT_FALSE(closed(Rational(0), Rational(11, 10)).valid());
  EXPECT_FALSE(closed(Rational(-1, 10), Rational(1, 2)).valid());
  // A degenerate interval must be closed on both ends to contain anything.
  EXPECT_FALSE((ProbInterval{Rational(1, 2), Rational(1, 2), false, true}.valid()));
  EXPECT_TRUE(closed(Rational(1, 2), Rational(1, 2)).valid());
}

TEST(ProbInterval, ContainsRespectsEndpointFlags) {
  auto d = closed(Rational(7, 10), Rational(9, 10));
  EXPECT_TRUE(d.contains(Rational(4, 5)));
  EXPECT_TRUE(d.contains(Rational(7, 10)));
  EXPECT_TRUE(d.contains(Rational(9, 10)));
  EXPECT_FALSE(d.contains(Rational(13, 20)));

  ProbInterval half_open{Rational(1, 5), Rational(2, 5), false, true};
  EXPECT_FALSE(half_open.contains(Rational(1, 5)));
  EXPECT_TRUE(half_open.contains(Rational(2, 5)));

  auto point = ProbInterval::point(Rational(3, 10));
  EXPECT_TRUE(point.contains(Rational(3, 10)));
  EXPECT_FALSE(point.contains(Rational(29, 100)));
}

TEST(ProbInterval, AdditionSumsEndpoints) {
  auto d = interval_add(closed(Rational(9, 50), Rational(11, 50)),
                        closed(Rational(27, 100), Rational(31, 100)));
  EXPECT_EQ(d, closed(Rational(9, 20), Rational(53, 100)));
}

TEST(ProbInterval, AdditionClampsAtOne) {
  auto d = interval_add(closed(Rational(7, 10), Rational(9, 10)),
                        closed(Rational(3, 20), Rational(1, 4)));
  EXPECT_EQ(d, closed(Rational(17, 20), Rational(1)));
}

TEST(ProbInterval, AdditionOpennessPropagates) {
  ProbInterval a{Rational(1, 5), Rational(2, 5), false, true};
  ProbInterval b{Rational(1, 10), Rational(1, 5), false, false};
  auto d = interval_add(a, b);
  EXPECT_EQ(d.lo, Rational(3, 10));
  EXPECT_EQ(d.hi, Rational(3, 5));
  EXPECT_FALSE(d.lo_closed);
  EXPECT_FALSE(d.hi_closed);

  // An endpoint stays closed only when both summands are closed there.
  auto e = interval_add(a, closed(Rational(1, 10), Rational(1, 5)));
  EXPECT_FALSE(e.lo_closed);
  EXPECT_TRUE(e.hi_closed);
}

TEST(ProbInterval, ClampingClosesAnOpenEndpoint) {
  ProbInterval a{Rational(1, 2), Rational(9, 10), false, false};
  ProbInterval b{Rational(3, 5), Rational(7, 10), false, false};
  auto d = interval_add(a, b);
  EXPECT_EQ(d, ProbInterval::point(Rational(1)));
  EXPECT_TRUE(d.lo_closed);
  EXPECT_TRUE(d.hi_closed);
}

TEST(ProbInterval, AdditionFoldMatchesGoldenBranching) {
  // The three-way branch bounds from the golden protocol fold to [9/10, 1].
  auto d = interval_add(interval_add(closed(Rational(9, 50), Rational(11, 50)),
                                     closed(Rational(27, 100), Rational(31, 100))),
                        closed(Rational(9, 20), Rational(13, 25)));
  EXPECT_EQ(d, closed(Rational(9, 10), Rational(1)));
}

TEST(ProbInterval, PrintsPointsAndRanges) {
  EXPECT_EQ(pmps::to_string(ProbInterval::point(Rational(3, 10))), "0.3");
  EXPECT_EQ(pmps::to_string(closed(Rational(7, 10), Rational(9, 10))), "[0.7,0.9]");
  EXPECT_EQ(pmps::to_string(ProbInterval{Rational(1, 5), Rational(2, 5), false, true}),
            "(0.2,0.4]");
  EXPECT_EQ(pmps::to_string(ProbInterval{Rational(1, 3), Rational(1, 2), true, false}),
            "[1/3,0.5)");
}
