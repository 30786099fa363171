#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "fairexp/random.hpp"

using fairexp::Rng;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000.0, 0.5, 0.01);
}

TEST(Rng, BelowCoversRangeEvenly) {
  Rng r(2);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) hits[r.below(7)]++;
  for (int h : hits) EXPECT_NEAR(h, 10000, 500);
}

TEST(Rng, NormalMoments) {
  Rng r(3);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(4);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(MixSeed, SeparatesTags) {
  EXPECT_NE(fairexp::mix_seed(1, 2), fairexp::mix_seed(1, 3));
  EXPECT_NE(fairexp::mix_seed(1, 2), fairexp::mix_seed(2, 2));
  EXPECT_EQ(fairexp::mix_seed(9, 9), fairexp::mix_seed(9, 9));
}
