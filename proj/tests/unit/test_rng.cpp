#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "batchrl/rng.hpp"

using namespace batchrl;

// Known-answer vectors for Philox4x32-10 from the Random123 distribution.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}),
            (std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RngStream, SameSeedAndStreamGiveSameSequence) {
  RngStream a(42, {3, 1, StreamPurpose::Action});
  RngStream b(42, {3, 1, StreamPurpose::Action});
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u32(), b.next_u32());
}

TEST(RngStream, StreamsDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint32_t env = 0; env < 64; ++env)
    for (auto p : {StreamPurpose::Reset, StreamPurpose::Action, StreamPurpose::Dynamics})
      firsts.insert(RngStream(7, {env, 0, p}).next_u64());
  EXPECT_EQ(firsts.size(), 64u * 3u);
  EXPECT_NE(RngStream(1, {0, 0, StreamPurpose::Reset}).next_u64(), RngStream(2, {0, 0, StreamPurpose::Reset}).next_u64());
}

TEST(RngStream, CounterAdvancesPerBlock) {
  RngStream r(0, {0, 0, StreamPurpose::Reset});
  for (int i = 0; i < 4; ++i) r.next_u32();
  EXPECT_EQ(r.counter_lo(), 1u);
  r.next_u32();
  EXPECT_EQ(r.counter_lo(), 2u);
}

TEST(RngStream, ReseedRestarts) {
  RngStream r(5, {1, 2, StreamPurpose::Shuffle});
  const auto first = r.next_u64();
  r.next_u64();
  r.reseed(5, {1, 2, StreamPurpose::Shuffle});
  EXPECT_EQ(r.next_u64(), first);
}

TEST(RngStream, UniformMoments) {
  RngStream r(11, {0, 0, StreamPurpose::Action});
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12.0, 0.002);
}

TEST(RngStream, BelowStaysInRangeAndCoversIt) {
  RngStream r(3, {0, 0, StreamPurpose::Action});
  std::array<int, 5> counts{};
  for (int i = 0; i < 50000; ++i) {
    const auto k = r.below(5);
    ASSERT_LT(k, 5u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c / 50000.0, 0.2, 0.01);
}

TEST(RngStream, NormalMoments) {
  RngStream r(9, {0, 0, StreamPurpose::Action});
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}
