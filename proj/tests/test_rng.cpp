#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "evoprune/rng.hpp"

namespace evoprune::rng {
namespace {

TEST(Rng, Mt19937_64MatchesStandardTenThousandthValue) {
  // The standard pins the 10000th output of a default-seeded mt19937_64.
  std::mt19937_64 gen;
  gen.discard(9999);
  EXPECT_EQ(gen(), 9981545732273789042ULL);
}

TEST(Rng, SplitmixKnownSequence) {
  std::uint64_t state = 0;
  EXPECT_EQ(splitmix64(state), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(splitmix64(state), 0x6E789E6AA1B965F4ULL);
}

TEST(Rng, DerivedSeedsSeparateStreamsAndIndices) {
  EXPECT_NE(derive_seed(0, Stream::shuffle, 0), derive_seed(0, Stream::init, 0));
  EXPECT_NE(derive_seed(0, Stream::shuffle, 0), derive_seed(0, Stream::shuffle, 1));
  EXPECT_NE(derive_seed(0, Stream::shuffle, 0), derive_seed(1, Stream::shuffle, 0));
  EXPECT_EQ(derive_seed(3, Stream::init, 2), derive_seed(3, Stream::init, 2));
}

TEST(Rng, UniformBelowStaysInRange) {
  auto gen = make_engine(1, Stream::synthetic, 0);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = uniform_below(gen, 7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_GT(c, 800);
}

TEST(Rng, Uniform01InHalfOpenInterval) {
  auto gen = make_engine(2, Stream::synthetic, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform01(gen);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, ShuffleIsPermutation) {
  auto gen = make_engine(3, Stream::shuffle, 0);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  shuffle(std::span<int>(v), gen);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
}

}  // namespace
}  // namespace evoprune::rng
