#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "geometry_oracle.hpp"
#include "warpfault/analysis.hpp"
#include "warpfault/errors.hpp"
#include "warpfault/rng.hpp"

using namespace warpfault;

TEST(Diff, Basics) {
  const Matrix g = random_matrix(6, 7, Precision::FP32, 1);
  EXPECT_TRUE(diff(g, g).empty());
  Matrix o = g;
  o.at(2, 3).bits ^= 1u;
  const Diff d = diff(g, o);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.corrupted[0], (Coord{2, 3}));
  EXPECT_EQ(d.magnitudes[0].first, g.at(2, 3));
  EXPECT_TRUE(diff(g, o, ComparisonPolicy::relative(1e-6)).empty());
  EXPECT_THROW(diff(g, random_matrix(7, 6, Precision::FP32, 1)), ContractViolation);
}

TEST(Diff, NanHandling) {
  Matrix g(Precision::FP32, 1, 1);
  g.at(0, 0) = {kCanonicalNanFp32};
  EXPECT_TRUE(diff(g, g).empty());
  EXPECT_EQ(diff(g, g, ComparisonPolicy::relative(0.1)).size(), 1u);
}

TEST(Geometry, Examples) {
  EXPECT_EQ(classify_geometry(std::vector<Coord>{{3, 5}}), GeometryClass::Single);
  EXPECT_EQ(classify_geometry(std::vector<Coord>{{2, 0}, {2, 5}, {2, 9}}), GeometryClass::Line);
  EXPECT_EQ(classify_geometry(std::vector<Coord>{{1, 1}, {1, 2}, {2, 1}, {2, 2}}), GeometryClass::Square);
  EXPECT_EQ(classify_geometry(std::vector<Coord>{{0, 0}, {5, 9}, {11, 3}}), GeometryClass::Random);
  EXPECT_EQ(classify_geometry(std::vector<Coord>{{0, 0}, {0, 1}, {0, 2}, {0, 3}}), GeometryClass::Line);
  EXPECT_THROW(classify_geometry(std::vector<Coord>{}), ContractViolation);
}

TEST(Geometry, AgreesWithBruteForceOracle) {
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto coords = oracle::random_coordinate_set(s);
    EXPECT_EQ(classify_geometry(coords), oracle::classify(coords)) << "seed " << s;
  }
}

TEST(Ci95, Wilson) {
  const Interval half = ci95(50, 100);
  EXPECT_NEAR(half.lo, 0.4038, 1e-3);
  EXPECT_NEAR(half.hi, 0.5962, 1e-3);
  EXPECT_EQ(ci95(0, 10).lo, 0.0);
  EXPECT_GT(ci95(0, 10).hi, 0.0);
  EXPECT_EQ(ci95(10, 10).hi, 1.0);
  EXPECT_THROW(ci95(11, 10), ContractViolation);
  EXPECT_THROW(ci95(0, 0), ContractViolation);
  for (std::uint64_t n = 1; n < 60; ++n) {
    for (std::uint64_t k = 0; k <= n; ++k) {
      const Interval ci = ci95(k, n);
      const double p = static_cast<double>(k) / static_cast<double>(n);
      EXPECT_LE(ci.lo, p);
      EXPECT_GE(ci.hi, p);
      EXPECT_GE(ci.lo, 0.0);
      EXPECT_LE(ci.hi, 1.0);
    }
  }
}

TEST(Svf, CountsAndOrderInvariance) {
  std::vector<Outcome> outcomes;
  for (int i = 0; i < 100; ++i) outcomes.push_back(Masked{});
  CampaignStats all_masked = svf(outcomes);
  EXPECT_EQ(all_masked.svf().value, 0.0);
  EXPECT_GT(all_masked.svf().ci.hi, 0.0);

  outcomes.clear();
  for (int i = 0; i < 50; ++i) outcomes.push_back(Sdc{GeometryClass::Square, Criticality::ClassChange});
  for (int i = 0; i < 30; ++i) outcomes.push_back(Masked{});
  for (int i = 0; i < 20; ++i) outcomes.push_back(Due{DueReason::Hang});
  const CampaignStats s = svf(outcomes);
  EXPECT_EQ(s.svf().value, 0.5);
  EXPECT_EQ(s.critical_svf().count, 50u);
  EXPECT_EQ(s.masked + s.sdc + s.due, s.n);
  Rng rng(3);
  std::shuffle(outcomes.begin(), outcomes.end(), rng);
  EXPECT_EQ(svf(outcomes), s);

  CampaignStats a = svf(std::span(outcomes).first(40)), b = svf(std::span(outcomes).subspan(40));
  CampaignStats ab = a, ba = b;
  ab.merge(b);
  ba.merge(a);
  EXPECT_EQ(ab, s);
  EXPECT_EQ(ba, s);
  EXPECT_THROW(svf(std::vector<Outcome>{}), ContractViolation);
}

TEST(Outcome, Describe) {
  EXPECT_EQ(describe(Masked{}), "Masked");
  EXPECT_EQ(describe(Sdc{GeometryClass::Line, std::nullopt}), "SDC/Line");
  EXPECT_EQ(describe(Sdc{GeometryClass::Line, Criticality::BoxDrift}), "SDC/Line/BoxDrift");
  EXPECT_EQ(describe(Due{DueReason::EccDoubleBit}), "DUE/EccDoubleBit");
}

TEST(Fit, Arithmetic) {
  EXPECT_EQ(fit(100, {1e10, 13.0}), 130.0);
  EXPECT_EQ(cross_section(100, {1e10, 13.0}), 1e-8);
  EXPECT_EQ(fit(0, {1e10, 13.0}), 0.0);
  EXPECT_DOUBLE_EQ(fit(100, {2e10, 13.0}), 65.0);
  EXPECT_THROW(fit(1, {0.0, 13.0}), ContractViolation);
  EXPECT_THROW(fit(1, {-1.0, 13.0}), ContractViolation);
  EXPECT_THROW(fit(1, {1.0, 0.0}), ContractViolation);
}
