#include <gtest/gtest.h>

#include "spectr/prob.hpp"
#include "spectr/rng.hpp"

namespace spectr {
namespace {

TEST(ProbVector, RejectsNegativeEntries) {
  EXPECT_THROW(ProbVector({-0.1, 1.1}), Error);
  try {
    ProbVector({-0.1, 1.1});
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
}

TEST(ProbVector, RejectsSumOffByMoreThanTolerance) {
  EXPECT_THROW(ProbVector({0.5, 0.5 + 2e-9}), Error);
  EXPECT_NO_THROW(ProbVector({0.5, 0.5 + 5e-10}));
}

TEST(ProbVector, ClampsRoundingNegatives) {
  const ProbVector p({-5e-13, 1.0});
  EXPECT_EQ(p[0], 0.0);
}

TEST(ProbVector, ParsesCommaSeparatedText) {
  const ProbVector p = parse_prob_vector("0.25, 0.75");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0], 0.25);
  EXPECT_EQ(p[1], 0.75);
  EXPECT_THROW(parse_prob_vector("0.25,abc"), Error);
  EXPECT_THROW(parse_prob_vector(""), Error);
  EXPECT_EQ(to_string(p), "0.25,0.75");
}

TEST(Sample, PointMassAlwaysReturnsItsToken) {
  const ProbVector d({1.0, 0.0});
  for (double u : {0.0, 0.3, 0.999999}) EXPECT_EQ(inverse_cdf(d, u), 0u);
  RngStream rng(3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample(d, rng), 0u);
}

TEST(Sample, LeftClosedIntervals) {
  const ProbVector d({0.5, 0.5});
  EXPECT_EQ(inverse_cdf(d, 0.25), 0u);
  EXPECT_EQ(inverse_cdf(d, 0.75), 1u);
  EXPECT_EQ(inverse_cdf(d, 0.5), 1u);
  EXPECT_EQ(inverse_cdf(d, 0.0), 0u);
}

TEST(Sample, ZeroMassTokenNeverDrawn) {
  const ProbVector d({0.0, 1.0, 0.0});
  EXPECT_EQ(inverse_cdf(d, 0.0), 1u);
  EXPECT_EQ(inverse_cdf(d, 0.9999999999), 1u);
}

TEST(Sample, ConsumesExactlyOneUniform) {
  RngStream rng(9);
  (void)sample(ProbVector({0.2, 0.3, 0.5}), rng);
  EXPECT_EQ(rng.counter(), 1u);
}

TEST(Sample, EmpiricalFrequenciesMatch) {
  const ProbVector d({0.2, 0.3, 0.5});
  RngStream rng(20240601);
  std::array<std::size_t, 3> counts{};
  constexpr std::size_t n = 1'000'000;
  for (std::size_t i = 0; i < n; ++i) ++counts[sample(d, rng)];
  for (TokenId i = 0; i < 3; ++i) {
    EXPECT_NEAR(static_cast<double>(counts[i]) / n, d[i], 0.005) << "token " << i;
  }
}

TEST(RngStream, EqualSeedsGiveEqualSequences) {
  RngStream a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(RngStream, ForkLeavesParentUntouched) {
  RngStream a(5), b(5);
  RngStream child = a.fork(7);
  (void)child.next_u64();
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(a.fork(1).next_u64(), a.fork(2).next_u64());
  EXPECT_EQ(a.fork(3).next_u64(), b.fork(3).next_u64());
}

TEST(RngStream, UniformInUnitInterval) {
  RngStream rng(1);
  double lo = 1.0, hi = 0.0, mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    mean += u;
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(mean / 100000, 0.5, 0.005);
}

TEST(TvDistance, WorkedExamples) {
  EXPECT_DOUBLE_EQ(tv_distance(ProbVector({0.3, 0.7}), ProbVector({0.3, 0.7})), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance(ProbVector({1.0, 0.0}), ProbVector({0.5, 0.5})), 0.5);
  EXPECT_DOUBLE_EQ(tv_distance(ProbVector({0.25, 0.75}), ProbVector({0.75, 0.25})), 0.5);
}

TEST(TvDistance, MismatchedVocabIsDimensionError) {
  try {
    (void)tv_distance(ProbVector({1.0}), ProbVector({0.5, 0.5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension);
  }
}

TEST(TvDistance, OverlapFormEqualsHalfL1) {
  RngStream rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + trial % 7;
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    for (auto& v : b) v = rng.uniform();
    a[0] += 1e-3;
    const ProbVector p = ProbVector::normalized(a), q = ProbVector::normalized(b);
    EXPECT_NEAR(tv_distance(p, q), tv_distance_l1(p, q), 1e-12);
    EXPECT_GE(tv_distance(p, q), 0.0);
    EXPECT_LE(tv_distance(p, q), 1.0);
  }
}

TEST(ResidualMaximal, WorkedExamples) {
  const ProbVector r1 = residual_maximal(ProbVector({1.0, 0.0}), ProbVector({0.5, 0.5}));
  EXPECT_NEAR(r1[0], 0.0, 1e-15);
  EXPECT_NEAR(r1[1], 1.0, 1e-15);
  const ProbVector r2 = residual_maximal(ProbVector({0.25, 0.75}), ProbVector({0.1, 0.9}));
  EXPECT_NEAR(r2[0], 0.0, 1e-15);
  EXPECT_NEAR(r2[1], 1.0, 1e-15);
}

TEST(ResidualMaximal, EqualDistributionsAreDegenerate) {
  try {
    (void)residual_maximal(ProbVector({0.5, 0.5}), ProbVector({0.5, 0.5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_residual);
  }
}

TEST(ResidualMaximal, IsAValidDistribution) {
  RngStream rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = rng.uniform();
    const ProbVector p = ProbVector::normalized(a), q = ProbVector::normalized(b);
    const ProbVector r = residual_maximal(p, q);
    double s = 0.0;
    for (double v : r) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
    // Zero residual wherever p already covers q.
    for (TokenId i = 0; i < 5; ++i) {
      if (p[i] >= q[i]) {
        EXPECT_EQ(r[i], 0.0);
      }
    }
  }
}

TEST(FormatReal, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 0.6875, 1e-17, 12345.678}) {
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
}

}  // namespace
}  // namespace spectr
