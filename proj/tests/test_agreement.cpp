#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "vqakit/agreement.hpp"
#include "vqakit/error.hpp"

using namespace vqakit;

TEST(ItemAgreement, Examples) {
  const std::vector<int> unanimous = {14, 0}, split = {1, 1}, two_one = {2, 1};
  EXPECT_DOUBLE_EQ(item_agreement(unanimous, 14), 1.0);
  EXPECT_DOUBLE_EQ(item_agreement(split, 2), 0.0);
  EXPECT_NEAR(item_agreement(two_one, 3), 1.0 / 3.0, 1e-15);
}

TEST(FleissKappa, Unanimous) {
  const RatingMatrix m({{3, 0}, {0, 3}, {3, 0}}, 3);
  EXPECT_NEAR(fleiss_kappa(m), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(percent_agreement(m), 1.0);
}

TEST(FleissKappa, DerivedTwoByTwo) {
  const RatingMatrix m({{2, 0}, {1, 1}}, 2);
  const auto k = fleiss_breakdown(m);
  EXPECT_NEAR(k.mean_agreement, 0.5, 1e-12);
  EXPECT_NEAR(k.chance_agreement, 0.625, 1e-12);
  EXPECT_NEAR(k.kappa, -1.0 / 3.0, 1e-12);
  const auto p = category_proportions(m);
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(percent_agreement(m), 0.5);
}

TEST(FleissKappa, SingleCategoryUndefined) {
  const RatingMatrix m({{2, 0}, {2, 0}}, 2);
  EXPECT_THROW(fleiss_kappa(m), InputError);
}

TEST(RatingMatrix, RowSumViolationListsItems) {
  try {
    RatingMatrix({{2, 0}, {1, 0}, {0, 3}}, 2, {"q1", "q2", "q3"});
    FAIL();
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("q2"), std::string::npos);
    EXPECT_NE(msg.find("q3"), std::string::npos);
    EXPECT_EQ(msg.find("q1"), std::string::npos);
  }
}

TEST(RatingMatrix, RejectsDegenerateShapes) {
  EXPECT_THROW(RatingMatrix({}, 2), InputError);
  EXPECT_THROW(RatingMatrix({{1, 0}}, 1), InputError);
  EXPECT_THROW(RatingMatrix({{2}}, 2), InputError);
  EXPECT_THROW(RatingMatrix({{2, 0}, {2}}, 2), InputError);
  EXPECT_THROW(RatingMatrix({{3, -1}}, 2), InputError);
}

namespace {

std::vector<std::vector<int>> random_counts(std::mt19937_64& rng, std::size_t N, int n, std::size_t k) {
  std::uniform_int_distribution<std::size_t> cat(0, k - 1);
  std::vector<std::vector<int>> c(N, std::vector<int>(k, 0));
  for (auto& row : c)
    for (int a = 0; a < n; ++a) ++row[cat(rng)];
  return c;
}

}  // namespace

TEST(FleissKappa, MatchesPairwiseOracle) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    const int n = 2 + t % 13;
    const std::size_t k = 2 + t % 4, N = 1 + t % 20;
    const auto counts = random_counts(rng, N, n, k);
    const RatingMatrix m(counts, n);
    double pe = 0;
    for (double p : category_proportions(m)) pe += p * p;
    if (pe >= 1.0) continue;
    ASSERT_NEAR(fleiss_kappa(m), oracle::kappa_pairwise(counts), 1e-12);
  }
}

TEST(FleissKappa, PermutationInvariant) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 200; ++t) {
    auto counts = random_counts(rng, 8, 5, 3);
    const double base = fleiss_kappa(RatingMatrix(counts, 5));
    std::shuffle(counts.begin(), counts.end(), rng);
    ASSERT_NEAR(fleiss_kappa(RatingMatrix(counts, 5)), base, 1e-12);
    std::vector<std::size_t> perm = {2, 0, 1};
    for (auto& row : counts) row = {row[perm[0]], row[perm[1]], row[perm[2]]};
    ASSERT_NEAR(fleiss_kappa(RatingMatrix(counts, 5)), base, 1e-12);
  }
}

TEST(FleissKappa, ProportionsAndItemAgreementInRange) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 200; ++t) {
    const RatingMatrix m(random_counts(rng, 6, 4, 3), 4);
    double s = 0;
    for (double p : category_proportions(m)) s += p;
    ASSERT_NEAR(s, 1.0, 1e-12);
    for (std::size_t i = 0; i < m.items(); ++i) {
      const double p = item_agreement(m.row(i), 4);
      ASSERT_GE(p, 0.0);
      ASSERT_LE(p, 1.0);
    }
  }
}

TEST(AggregateRatings, BuildsCounts) {
  const auto m = aggregate_ratings({{"a1", "q1", "yes"}, {"a2", "q1", "yes"}, {"a1", "q2", "yes"},
                                    {"a2", "q2", "no"}});
  EXPECT_EQ(m.items(), 2u);
  EXPECT_EQ(m.annotators(), 2);
  EXPECT_EQ(m.category_names(), (std::vector<std::string>{"no", "yes"}));
  EXPECT_EQ(m.counts(), (std::vector<std::vector<int>>{{0, 2}, {1, 1}}));
  EXPECT_NEAR(fleiss_kappa(m), -1.0 / 3.0, 1e-12);
}

TEST(AggregateRatings, RejectsIncompleteAndDuplicate) {
  try {
    aggregate_ratings({{"a1", "q1", "x"}, {"a2", "q1", "y"}, {"a1", "q2", "x"}});
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("q2"), std::string::npos);
  }
  EXPECT_THROW(aggregate_ratings({{"a1", "q1", "x"}, {"a1", "q1", "y"}}), InputError);
}
