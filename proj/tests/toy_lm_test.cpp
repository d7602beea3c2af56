#include <gtest/gtest.h>

#include <thread>

#include "spectr/toy_lm.hpp"

namespace spectr {
namespace {

TEST(ToyLm, OrderZeroIgnoresContext) {
  const ToyLm m(ToyLmConfig{8, 0, 3, false});
  const ProbVector a = m.next_dist(TokenSeq{});
  EXPECT_EQ(m.next_dist(TokenSeq{1, 2, 3}), a);
  EXPECT_EQ(m.next_dist(TokenSeq{7}), a);
}

TEST(ToyLm, OrderOneUsesLastToken) {
  const ToyLm m(ToyLmConfig{8, 1, 3, false});
  EXPECT_EQ(m.next_dist(TokenSeq{4, 2}), m.next_dist(TokenSeq{2}));
  EXPECT_EQ(m.next_dist(TokenSeq{0, 0, 2}), m.next_dist(TokenSeq{5, 2}));
  EXPECT_FALSE(m.next_dist(TokenSeq{2}) == m.next_dist(TokenSeq{3}));
}

TEST(ToyLm, DeterministicAcrossInstances) {
  const ToyLm a(ToyLmConfig{16, 2, 42, false}), b(ToyLmConfig{16, 2, 42, false});
  const ToyLm c(ToyLmConfig{16, 2, 43, false});
  const TokenSeq ctx{3, 9};
  EXPECT_EQ(a.next_dist(ctx), b.next_dist(ctx));
  EXPECT_FALSE(a.next_dist(ctx) == c.next_dist(ctx));
  // Memoized rows are stable.
  EXPECT_EQ(a.next_dist(ctx), a.next_dist(ctx));
}

TEST(ToyLm, ConcurrentQueriesAgree) {
  const ToyLm m(ToyLmConfig{12, 1, 5, false});
  const ToyLm ref(ToyLmConfig{12, 1, 5, false});
  std::vector<std::thread> pool;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back([&] {
      for (TokenId x = 0; x < 12; ++x) {
        if (!(m.next_dist(TokenSeq{x}) == ref.next_dist(TokenSeq{x}))) ++mismatches;
      }
    });
  }
  for (auto& th : pool) th.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(ToyLm, RejectsOutOfVocabularyContext) {
  const ToyLm m(ToyLmConfig{4, 1, 1, false});
  try {
    (void)m.next_dist(TokenSeq{4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}

TEST(ToyLm, AllowZerosKeepsSomeMass) {
  const ToyLm m(ToyLmConfig{16, 1, 9, true});
  bool saw_zero = false;
  for (TokenId x = 0; x < 16; ++x) {
    const ProbVector row = m.next_dist(TokenSeq{x});
    std::size_t positive = 0;
    for (double v : row) {
      positive += v > 0.0;
      saw_zero |= v == 0.0;
    }
    EXPECT_GE(positive, 1u);
  }
  EXPECT_TRUE(saw_zero);
}

TEST(ToyLm, PointMassModel) {
  const ToyLm m = point_mass_model(5, 3);
  const ProbVector d = m.next_dist(TokenSeq{0, 1});
  EXPECT_EQ(d[3], 1.0);
  EXPECT_EQ(d[0], 0.0);
}

TEST(ModelPair, ZeroEpsGivesIdenticalRows) {
  const ModelPair pair = make_model_pair(16, 1, 7, 0.0);
  for (TokenId x = 0; x < 16; ++x) EXPECT_EQ(pair.big.next_dist(TokenSeq{x}), pair.small.next_dist(TokenSeq{x}));
  EXPECT_LT(probe_mean_tv(pair), 1e-12);
}

TEST(ModelPair, FullEpsGivesThePerturbationModel) {
  const ModelPair pair = make_model_pair(16, 1, 7, 1.0);
  const ToyLm pert(ToyLmConfig{16, 1, 7 ^ kPerturbationSalt, false});
  for (TokenId x = 0; x < 16; ++x) EXPECT_EQ(pair.small.next_dist(TokenSeq{x}), pert.next_dist(TokenSeq{x}));
}

TEST(ModelPair, DivergenceGrowsWithEps) {
  double prev = -1.0;
  for (double eps : {0.0, 0.1, 0.3, 0.6, 1.0}) {
    const double tv = probe_mean_tv(make_model_pair(16, 1, 7, eps));
    EXPECT_GT(tv, prev);
    prev = tv;
  }
}

TEST(ModelPair, GoldenProbeDivergence) {
  // Regression value for vocab 16, order 1, seed 7, eps 0.3.
  EXPECT_NEAR(probe_mean_tv(make_model_pair(16, 1, 7, 0.3)), 0.151014, 1e-6);
}

TEST(ModelPair, RejectsBadConfig) {
  EXPECT_THROW((void)make_model_pair(16, 1, 7, 1.5), Error);
  EXPECT_THROW((void)make_model_pair(16, 1, 7, -0.1), Error);
  EXPECT_THROW((void)make_model_pair(1, 1, 7, 0.3), Error);
}

TEST(CostModel, RejectsNegativeCosts) {
  EXPECT_NO_THROW(CostModel{}.validate());
  EXPECT_THROW((CostModel{1.0, -0.1, 0.0}.validate()), Error);
}

}  // namespace
}  // namespace spectr
