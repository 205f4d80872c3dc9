#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "coserec/augment.hpp"
#include "coserec/error.hpp"
#include "coserec/ratio.hpp"
#include "helpers.hpp"

using namespace coserec;
using namespace coserec::augment;
using coserec::testing::random_sequence;

namespace {

constexpr std::size_t kItems = 30;
constexpr ItemId kMask = kItems + 1;

// Every item co-occurs with its neighbours, so every top1 exists.
correlation::CorrelationTable chain_table() {
  std::vector<std::vector<ItemId>> users;
  for (ItemId i = 1; i < kItems; ++i) users.push_back({i, static_cast<ItemId>(i + 1)});
  return correlation::memory_correlation(users, kItems);
}

bool is_factor(const Sequence& part, const Sequence& whole) {
  return std::search(whole.begin(), whole.end(), part.begin(), part.end()) != whole.end() || part.empty();
}

bool is_subsequence(const Sequence& part, const Sequence& whole) {
  std::size_t j = 0;
  for (ItemId v : whole) {
    if (j < part.size() && part[j] == v) ++j;
  }
  return j == part.size();
}

}  // namespace

TEST(Operators, ParseAndPrint) {
  EXPECT_EQ(to_string(parse_operator_set("SIM")), "SIM");
  EXPECT_EQ(operator_from_char('R'), Operator::Reorder);
  EXPECT_THROW(parse_operator_set("SX"), ConfigError);
  EXPECT_THROW(parse_operator_set("SS"), ConfigError);
}

TEST(Params, Validation) {
  AugmentParams p;
  EXPECT_NO_THROW(p.validate());
  p.alpha = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.eta = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.short_ops.clear();
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Crop, HalfOfFour) {
  Rng rng(1);
  const Sequence s = {1, 2, 3, 4};
  const auto out = crop(s, 0.5, rng);
  EXPECT_EQ(out.size(), 2u);
  EXPECT_TRUE(is_factor(out, s));
}

TEST(Crop, SingleItemSurvives) {
  Rng rng(2);
  EXPECT_EQ(crop(Sequence{7}, 0.1, rng), Sequence{7});
}

TEST(Crop, StartIsUniform) {
  Rng rng(3);
  const Sequence s = {1, 2, 3, 4, 5};
  std::map<ItemId, int> starts;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) ++starts[crop(s, 0.4, rng).front()];
  ASSERT_EQ(starts.size(), 4u);
  const double sd = std::sqrt(draws * 0.25 * 0.75);
  for (auto [_, c] : starts) EXPECT_NEAR(c, draws / 4.0, 5 * sd);
}

TEST(Mask, ZeroIsIdentity) {
  Rng rng(4);
  const Sequence s = {1, 2, 3, 4};
  EXPECT_EQ(mask(s, 0.0, kMask, rng), s);
}

TEST(Mask, HalfOfFour) {
  Rng rng(5);
  const Sequence s = {1, 2, 3, 4};
  const auto out = mask(s, 0.5, kMask, rng);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(std::count(out.begin(), out.end(), kMask), 2);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(out[i] == s[i] || out[i] == kMask);
}

TEST(Reorder, SingleWindowIsIdentity) {
  Rng rng(6);
  const Sequence s = {1, 2, 3, 4};
  EXPECT_EQ(reorder(s, 0.25, rng), s);
  EXPECT_EQ(reorder(s, 0.0, rng), s);
}

TEST(Reorder, ChangesOnlyOneWindow) {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    auto s = random_sequence(1 + rng.uniform_index(30), kItems, rng);
    const auto out = reorder(s, 0.5, rng);
    const std::size_t r = ratio_count(0.5, s.size());
    std::size_t first = s.size(), last = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (out[i] != s[i]) first = std::min(first, i), last = std::max(last, i);
    }
    if (first < s.size()) EXPECT_LT(last - first, r);
    auto a = s, b = out;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST(Substitute, ZeroIsIdentity) {
  Rng rng(8);
  const auto table = chain_table();
  const Sequence s = {1, 2, 3, 4};
  EXPECT_EQ(substitute(s, 0.0, table, kMask, rng), s);
}

TEST(Substitute, ReplacesWithTop1) {
  Rng rng(9);
  const auto table = chain_table();
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = random_sequence(1 + rng.uniform_index(20), kItems, rng);
    const double alpha = 0.1 * static_cast<double>(rng.uniform_index(11));
    const auto out = substitute(s, alpha, table, kMask, rng);
    ASSERT_EQ(out.size(), s.size());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (out[i] == s[i]) continue;
      ++changed;
      EXPECT_EQ(out[i], table.top1(s[i])->item);
    }
    EXPECT_EQ(changed, ratio_count(alpha, s.size()));
  }
}

TEST(Substitute, OneOfFourAtDefaultAlpha) {
  Rng rng(10);
  const auto table = chain_table();
  const Sequence s = {1, 5, 9, 13};
  const auto out = substitute(s, 0.1, table, kMask, rng);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < 4; ++i) changed += out[i] != s[i];
  EXPECT_EQ(changed, 1u);
}

TEST(Substitute, MissingPartnerFallsBackToMask) {
  Rng rng(11);
  const std::vector<std::vector<ItemId>> users = {{1, 2}};
  const auto table = correlation::memory_correlation(users, 5);
  AugmentStats stats;
  const Sequence s = {4, 4, 4};
  const auto out = substitute(s, 1.0, table, 6, rng, &stats);
  EXPECT_EQ(out, (Sequence{6, 6, 6}));
  EXPECT_EQ(stats.substitute_fallbacks, 3u);
}

TEST(Insert, ZeroIsIdentity) {
  Rng rng(12);
  const auto table = chain_table();
  const Sequence s = {1, 2, 3, 4};
  EXPECT_EQ(insert(s, 0.0, table, rng), s);
}

TEST(Insert, LengthAndRecovery) {
  Rng rng(13);
  const auto table = chain_table();
  const Sequence s = {3, 8, 2, 5};
  const auto out = insert(s, 0.4, table, rng);
  EXPECT_EQ(out.size(), 6u);
  EXPECT_TRUE(is_subsequence(s, out));
}

TEST(Insert, PartnerPrecedesSelectedItem) {
  Rng rng(14);
  const auto table = chain_table();
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = random_sequence(1 + rng.uniform_index(20), kItems, rng);
    const auto out = insert(s, 1.0, table, rng);
    ASSERT_EQ(out.size(), 2 * s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_EQ(out[2 * i], table.top1(s[i])->item);
      EXPECT_EQ(out[2 * i + 1], s[i]);
    }
  }
}

TEST(Insert, MissingPartnerSkipped) {
  Rng rng(15);
  const std::vector<std::vector<ItemId>> users = {{1, 2}};
  const auto table = correlation::memory_correlation(users, 5);
  AugmentStats stats;
  const Sequence s = {4, 1};
  const auto out = insert(s, 1.0, table, rng, &stats);
  EXPECT_EQ(out, (Sequence{4, 2, 1}));
  EXPECT_EQ(stats.insert_skips, 1u);
}

TEST(Dispatch, ShortAndLongSets) {
  AugmentParams p;
  p.short_threshold = 4;
  Rng rng(16);
  std::map<Operator, int> short_counts, long_counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto [a, b] = sample_operator_pair(3, p, rng);
    ++short_counts[a], ++short_counts[b];
    const auto [c, d] = sample_operator_pair(10, p, rng);
    ++long_counts[c], ++long_counts[d];
  }
  EXPECT_EQ(short_counts.size(), 3u);
  EXPECT_EQ(short_counts.count(Operator::Crop), 0u);
  EXPECT_EQ(short_counts.count(Operator::Reorder), 0u);
  EXPECT_EQ(long_counts.size(), 5u);
  const auto within = [](int count, int n, double p) {
    return std::abs(count - n * p) <= 5 * std::sqrt(n * p * (1 - p));
  };
  for (auto [_, c] : short_counts) EXPECT_TRUE(within(c, 2 * draws, 1.0 / 3));
  for (auto [_, c] : long_counts) EXPECT_TRUE(within(c, 2 * draws, 1.0 / 5));
}

TEST(Dispatch, ThresholdIsInclusive) {
  AugmentParams p;
  p.short_threshold = 4;
  p.short_ops = {Operator::Mask};
  p.long_ops = {Operator::Crop};
  Rng rng(17);
  EXPECT_EQ(sample_operator_pair(4, p, rng).first, Operator::Mask);
  EXPECT_EQ(sample_operator_pair(5, p, rng).first, Operator::Crop);
}

TEST(Dispatch, FixedPairOverrides) {
  AugmentParams p;
  p.fixed_pair = std::make_pair(Operator::Insert, Operator::Insert);
  Rng rng(18);
  for (std::size_t n : {1, 5, 40}) {
    const auto [a, b] = sample_operator_pair(n, p, rng);
    EXPECT_EQ(a, Operator::Insert);
    EXPECT_EQ(b, Operator::Insert);
  }
}

TEST(AugmentPair, ZeroRatioMaskOnlyGivesInputTwice) {
  AugmentParams p;
  p.mu = 0.0;
  p.short_ops = p.long_ops = {Operator::Mask};
  Rng rng(19);
  const Sequence s = {4, 2, 9, 1, 3};
  const auto pair = augment_pair(s, p, nullptr, kMask, rng);
  EXPECT_EQ(pair.view1, s);
  EXPECT_EQ(pair.view2, s);
}

TEST(AugmentPair, InsertOverflowKeepsMostRecent) {
  const auto table = chain_table();
  AugmentParams p;
  p.beta = 0.2;
  p.fixed_pair = std::make_pair(Operator::Insert, Operator::Insert);
  p.max_length = 50;
  Rng rng(20);
  const auto s = random_sequence(50, kItems, rng);
  const auto full = insert(s, 0.2, table, rng);
  EXPECT_EQ(full.size(), 60u);
  const auto pair = augment_pair(s, p, &table, kMask, rng);
  EXPECT_EQ(pair.view1.size(), 50u);
  EXPECT_EQ(pair.view2.size(), 50u);
  EXPECT_EQ(pair.view1.back(), s.back());
}

TEST(AugmentPair, DeterministicUnderSeed) {
  const auto table = chain_table();
  AugmentParams p;
  Rng a(21), b(21), src(22);
  const auto s = random_sequence(17, kItems, src);
  const auto x = augment_pair(s, p, &table, kMask, a);
  const auto y = augment_pair(s, p, &table, kMask, b);
  EXPECT_EQ(x.view1, y.view1);
  EXPECT_EQ(x.view2, y.view2);
  EXPECT_EQ(x.op1, y.op1);
}

TEST(AugmentPair, InformativeOperatorNeedsTable) {
  AugmentParams p;
  p.fixed_pair = std::make_pair(Operator::Substitute, Operator::Mask);
  Rng rng(23);
  EXPECT_THROW(augment_pair(Sequence{1, 2, 3}, p, nullptr, kMask, rng), ConfigError);
}
