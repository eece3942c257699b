#include "pivotgen/denoise.hpp"

#include <random>

#include <gtest/gtest.h>

#include "pivotgen/pseudo.hpp"

using namespace pivotgen;

namespace {

const Tokens kTen{"t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9"};

// Surviving original tokens keep their order once inserted donor tokens
// (disjoint from the sources here) are removed.
bool preserves_order(const Tokens& original, const Tokens& noisy) {
  Tokens kept;
  for (const auto& w : noisy)
    if (w != "x" && w != "y" && w != "z") kept.push_back(w);
  return is_subsequence(kept, original);
}

}  // namespace

TEST(DropNoise, EdgeCases) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(drop_noise(kTen, 0.0, rng), kTen);
  for (int i = 0; i < 50; ++i) {
    auto one = drop_noise(kTen, 1.0, rng);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_NE(std::find(kTen.begin(), kTen.end(), one[0]), kTen.end());
  }
  EXPECT_THROW(drop_noise(Tokens{}, 0.1, rng), Error);
}

TEST(DropNoise, MonteCarloMean) {
  std::mt19937_64 rng(2);
  double total = 0;
  for (int i = 0; i < 10000; ++i) {
    auto out = drop_noise(kTen, 0.1, rng);
    EXPECT_TRUE(is_subsequence(out, kTen));
    total += out.size();
  }
  EXPECT_NEAR(total / 10000, 9.0, 0.1);
}

TEST(InsertNoise, LengthAndMean) {
  std::mt19937_64 rng(3);
  const Tokens four{"a", "b", "c", "d"};
  const std::vector<Tokens> donors{{"x", "y"}, {"z"}};
  EXPECT_EQ(insert_noise(four, 0.0, donors, rng), four);
  EXPECT_THROW(insert_noise(four, 0.2, {}, rng), Error);
  double total = 0;
  for (int i = 0; i < 10000; ++i) {
    auto out = insert_noise(four, 0.2, donors, rng);
    EXPECT_TRUE(is_subsequence(four, out));
    std::size_t inserted = 0;
    for (const auto& w : out) inserted += (w == "x" || w == "y" || w == "z");
    EXPECT_EQ(out.size(), four.size() + inserted);
    total += out.size();
  }
  EXPECT_NEAR(total / 10000, 5.0, 0.05);
}

TEST(AugmentBatch, TargetsUntouchedAndDeterministic) {
  std::vector<TrainPair> batch{{{"a", "b", "c"}, {"text", "a"}}, {{"d"}, {"text", "d", "."}}};
  const std::vector<Tokens> donors{{"x"}, {"y", "z"}};
  std::mt19937_64 rng(4);
  EXPECT_EQ(augment_batch(batch, NoiseConfig{0.0, 0.0}, donors, rng), batch);

  NoiseConfig cfg{0.3, 0.3};
  std::mt19937_64 r1(9), r2(9);
  auto a = augment_batch(batch, cfg, donors, r1);
  auto b = augment_batch(batch, cfg, donors, r2);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_EQ(a[i].target, batch[i].target);
    EXPECT_TRUE(preserves_order(batch[i].source, a[i].source));
  }
}

TEST(NoiseConfig, Validation) {
  EXPECT_THROW((NoiseConfig{1.5, 0.0}.validate()), Error);
  EXPECT_THROW((NoiseConfig{0.0, 0.1}.validate(false)), Error);
  EXPECT_NO_THROW((NoiseConfig{0.1, 0.1}.validate(true)));
}
