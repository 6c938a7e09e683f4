#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>

#include "alloc_hook.hpp"
#include "batchrl/lanes.hpp"

using namespace batchrl;

namespace {
std::vector<std::pair<std::size_t, std::size_t>> as_pairs(const std::vector<LaneRange>& r) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (auto x : r) out.emplace_back(x.begin, x.end);
  return out;
}
}  // namespace

TEST(PartitionLanes, BalancedSplit) {
  using P = std::vector<std::pair<std::size_t, std::size_t>>;
  EXPECT_EQ(as_pairs(partition_lanes(10, 3)), (P{{0, 4}, {4, 7}, {7, 10}}));
  EXPECT_EQ(as_pairs(partition_lanes(4, 1)), (P{{0, 4}}));
  EXPECT_EQ(as_pairs(partition_lanes(2, 4)), (P{{0, 1}, {1, 2}, {2, 2}, {2, 2}}));
}

TEST(PartitionLanes, CoversDisjointlyWithSizesWithinOne) {
  for (std::size_t E : {0u, 1u, 7u, 64u, 1000u, 1023u})
    for (std::size_t W : {1u, 2u, 3u, 8u, 13u}) {
      const auto r = partition_lanes(E, W);
      ASSERT_EQ(r.size(), W);
      std::size_t next = 0, lo = SIZE_MAX, hi = 0;
      for (auto x : r) {
        EXPECT_EQ(x.begin, next);
        next = x.end;
        lo = std::min(lo, x.size());
        hi = std::max(hi, x.size());
      }
      EXPECT_EQ(next, E);
      EXPECT_LE(hi - lo, 1u);
    }
}

TEST(LanePool, RunsEveryLaneOnce) {
  LanePool pool(4);
  std::vector<std::atomic<int>> hits(4);
  for (int round = 0; round < 100; ++round) pool.run([&](std::size_t lane) { hits[lane]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 100);
}

TEST(LanePool, RethrowsLowestLaneError) {
  LanePool pool(3);
  try {
    pool.run([](std::size_t lane) {
      if (lane >= 1) throw std::runtime_error("lane " + std::to_string(lane));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "lane 1");
  }
  // Still usable afterwards.
  std::atomic<int> n{0};
  pool.run([&](std::size_t) { n++; });
  EXPECT_EQ(n.load(), 3);
}

TEST(LanePool, DispatchDoesNotAllocate) {
  LanePool pool(2);
  std::atomic<int> n{0};
  pool.run([&](std::size_t) { n++; });
  const auto before = testing_support::allocation_count();
  for (int i = 0; i < 1000; ++i) pool.run([&](std::size_t) { n++; });
  EXPECT_EQ(testing_support::allocation_count() - before, 0u);
}

TEST(LanePool, DefaultLaneCountFromEnvironment) {
  ::setenv("BATCHRL_LANES", "3", 1);
  EXPECT_EQ(default_lane_count(), 3u);
  ::setenv("BATCHRL_LANES", "junk", 1);
  EXPECT_GE(default_lane_count(), 1u);
  ::unsetenv("BATCHRL_LANES");
}
