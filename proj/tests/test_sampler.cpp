#include <gtest/gtest.h>

#include <map>
#include <set>

#include "smartcpd/rng.hpp"
#include "smartcpd/sampler.hpp"

using namespace smartcpd;

TEST(Sampler, BlockFrequencyOrderTwo) {
  Sampler s(1);
  int zeros = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) zeros += s.sample_block(2) == 0;
  const double f = static_cast<double>(zeros) / n;
  EXPECT_GE(f, 0.49);
  EXPECT_LE(f, 0.51);
}

TEST(Sampler, BlockFrequencyHigherOrder) {
  Sampler s(2);
  std::map<std::size_t, int> counts;
  const int n = 100000;
  for (int k = 0; k < n; ++k) counts[s.sample_block(5)]++;
  ASSERT_EQ(counts.size(), 5u);
  for (const auto& [mode, c] : counts) EXPECT_NEAR(static_cast<double>(c) / n, 0.2, 0.01) << mode;
}

TEST(Sampler, SingleFiberFrequency) {
  Sampler s(3);
  std::map<std::uint64_t, int> counts;
  const int n = 100000;
  for (int k = 0; k < n; ++k) counts[s.sample_fibers(4, 1).at(0)]++;
  ASSERT_EQ(counts.size(), 4u);
  for (const auto& [j, c] : counts) EXPECT_NEAR(static_cast<double>(c) / n, 0.25, 0.01) << j;
}

// All C(6,3) = 20 subsets appear with equal frequency (chi-square, 19 dof, p ~ 1e-4 cutoff).
TEST(Sampler, SubsetUniformity) {
  Sampler s(4);
  std::map<FiberSet, int> counts;
  const int n = 200000;
  for (int k = 0; k < n; ++k) counts[s.sample_fibers(6, 3)]++;
  ASSERT_EQ(counts.size(), 20u);
  const double expected = n / 20.0;
  double chi2 = 0.0;
  for (const auto& [set, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 50.0);
}

TEST(Sampler, DistinctSortedInRange) {
  Sampler s(5);
  for (std::uint64_t j : {1ull, 7ull, 100ull, 1000000000ull}) {
    for (std::uint64_t b : {1ull, 2ull, 7ull, 50ull}) {
      if (b > j) continue;
      const FiberSet f = s.sample_fibers(j, b);
      ASSERT_EQ(f.size(), b);
      EXPECT_TRUE(std::is_sorted(f.begin(), f.end()));
      EXPECT_EQ(std::set<std::uint64_t>(f.begin(), f.end()).size(), b);
      EXPECT_LT(f.back(), j);
    }
  }
}

TEST(Sampler, FullBatchReturnsAll) {
  Sampler s(6);
  const FiberSet f = s.sample_fibers(9, 9);
  for (std::uint64_t j = 0; j < 9; ++j) EXPECT_EQ(f[j], j);
}

TEST(Sampler, Deterministic) {
  Sampler a(42), b(42), c(43);
  bool differs = false;
  for (int k = 0; k < 100; ++k) {
    const std::size_t ma = a.sample_block(3);
    EXPECT_EQ(ma, b.sample_block(3));
    differs = differs || ma != c.sample_block(3);
    const FiberSet fa = a.sample_fibers(1000, 10);
    EXPECT_EQ(fa, b.sample_fibers(1000, 10));
    differs = differs || fa != c.sample_fibers(1000, 10);
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.seed(), 42u);
}

TEST(Sampler, Errors) {
  Sampler s(7);
  EXPECT_THROW(s.sample_block(1), std::invalid_argument);
  EXPECT_THROW(s.sample_block(0), std::invalid_argument);
  EXPECT_THROW(s.sample_fibers(5, 0), std::invalid_argument);
  EXPECT_THROW(s.sample_fibers(5, 6), std::invalid_argument);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  auto a = stream_for(1, 5), b = stream_for(1, 5), c = stream_for(1, 6), d = stream_for(2, 5);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_EQ(derive_seed(9, 3), derive_seed(9, 3));
}

TEST(Rng, UniformMean) {
  auto g = stream_for(11, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double s = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) s += u(g);
  EXPECT_NEAR(s / n, 0.5, 0.005);
}
