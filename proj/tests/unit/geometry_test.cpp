#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "arraysel/geometry.hpp"

using namespace arraysel;

namespace {

double radius(const Vec3& p) { return std::hypot(p.x, p.y, p.z); }

}  // namespace

TEST(Ura, FourByFourCorners) {
  const auto a = build_ura(4, 4, 0.5);
  ASSERT_EQ(a.size(), 16u);
  EXPECT_EQ(a.position(0), (Vec3{0.0, 0.0, 0.0}));
  EXPECT_EQ(a.position(15), (Vec3{1.5, 1.5, 0.0}));
  EXPECT_EQ(a.kind(), ArrayKind::ura);
  // row-major flattening: (i, j) -> i*m2 + j
  EXPECT_EQ(a.position(1 * 4 + 2), (Vec3{0.5, 1.0, 0.0}));
}

TEST(Ura, SizesAndSmallestGrid) {
  EXPECT_EQ(build_ura(5, 5, 0.5).size(), 25u);
  const auto two = build_ura(1, 2, 0.5);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_DOUBLE_EQ(distance(two.position(0), two.position(1)), 0.5);
}

TEST(Ura, RejectsBadArguments) {
  EXPECT_THROW(build_ura(0, 4, 0.5), std::invalid_argument);
  EXPECT_THROW(build_ura(1, 1, 0.5), std::invalid_argument);
  EXPECT_THROW(build_ura(2, 2, 0.0), std::invalid_argument);
  EXPECT_THROW(build_ura(2, 2, std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
}

TEST(Uca, SixteenElementsChordFormula) {
  const auto a = build_uca(16, 0.5);
  ASSERT_EQ(a.size(), 16u);
  const double r = 0.5 / (2.0 * std::sin(std::numbers::pi / 16.0));
  EXPECT_NEAR(r, 1.2815, 1e-4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(radius(a.position(i)), r, 1e-12);
    EXPECT_NEAR(distance(a.position(i), a.position((i + 1) % a.size())), 0.5, 1e-12);
  }
  EXPECT_NEAR(a.position(0).x, r, 1e-12);
  EXPECT_NEAR(a.position(0).y, 0.0, 1e-12);
}

TEST(Uca, CountsAndSquareRadius) {
  EXPECT_EQ(build_uca(20, 0.5).size(), 20u);
  const auto sq = build_uca(4, 0.8);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(radius(sq.position(i)), 0.8 / std::sqrt(2.0), 1e-12);
}

TEST(Perturb, ZeroSigmaIsIdentity) {
  const auto a = build_uca(8, 0.5);
  EXPECT_EQ(perturb_positions(a, 0.0, 42).positions().size(), 8u);
  const auto b = perturb_positions(a, 0.0, 42);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.position(i), b.position(i));
}

TEST(Perturb, SeededAndDeterministic) {
  const auto a = build_ura(4, 4, 0.5);
  const auto p1 = perturb_positions(a, 0.25, 9);
  const auto p2 = perturb_positions(a, 0.25, 9);
  const auto p3 = perturb_positions(a, 0.25, 10);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(p1.position(i), p2.position(i));
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= !(p1.position(i) == p3.position(i));
  EXPECT_TRUE(differs);
}

TEST(Perturb, QuarterWavelengthSpread) {
  const auto a = build_uca(400, 0.5);
  const auto p = perturb_positions(a, 0.25, 3);
  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (double d : {p.position(i).x - a.position(i).x, p.position(i).y - a.position(i).y,
                     p.position(i).z - a.position(i).z}) {
      sum += d;
      sq += d * d;
      ++n;
    }
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(sd, 0.25, 0.02);
  EXPECT_NEAR(mean, 0.0, 0.03);
}

TEST(Retrieval, MinimumSensorCounts) {
  EXPECT_EQ(min_sensors_for_retrieval(4, 4), 12);
  EXPECT_EQ(min_sensors_for_retrieval(1, 9), 8);
  EXPECT_EQ(min_sensors_for_retrieval(5, 5), 20);
}

TEST(Custom, Validation) {
  EXPECT_THROW(SensorArray::custom({{0, 0, 0}}), std::invalid_argument);
  EXPECT_THROW(SensorArray::custom({{0, 0, 0}, {0, 0, 0}}), std::invalid_argument);
  EXPECT_THROW(SensorArray::custom({{0, 0, 0}, {std::numeric_limits<double>::infinity(), 0, 0}}),
               std::invalid_argument);
  const auto ok = SensorArray::custom({{0, 0, 0}, {0.5, 0, 0}, {0, 0, 0.5}});
  EXPECT_EQ(ok.size(), 3u);
  EXPECT_EQ(ok.kind(), ArrayKind::custom);
}

TEST(Subset, KeepsOrder) {
  const auto a = build_uca(8, 0.5);
  const int idx[] = {5, 1, 3};
  const auto s = a.subset(idx);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.position(0), a.position(5));
  EXPECT_EQ(s.position(2), a.position(3));
}

TEST(GeometryText, RoundTrip) {
  const auto a = perturb_positions(build_ura(3, 2, 0.5), 0.1, 4);
  std::stringstream ss;
  write_geometry(ss, a);
  const auto b = read_geometry(ss);
  ASSERT_EQ(b.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.position(i), b.position(i));
}

TEST(GeometryText, CommentsAndBadLines) {
  std::istringstream ok("# two sensors\n0 0 0\n\n0.5 0 0\n");
  EXPECT_EQ(read_geometry(ok).size(), 2u);
  std::istringstream bad("0 0 0\n0.5 zero 0\n");
  EXPECT_ANY_THROW(read_geometry(bad));
}
