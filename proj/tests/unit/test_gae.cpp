#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "batchrl/error.hpp"
#include "batchrl/gae.hpp"
#include "batchrl/rng.hpp"
#include "gae_oracle.hpp"

using namespace batchrl;

namespace {

struct Gae {
  std::vector<double> adv, ret;
};

Gae run(const std::vector<double>& r, const std::vector<double>& v, const std::vector<std::uint8_t>& d,
        double boot, double gamma, double lambda) {
  const std::size_t T = r.size();
  Gae out{std::vector<double>(T), std::vector<double>(T)};
  std::vector<double> b{boot};
  compute_gae<double, double, double>({T, 1, 1}, r, v, d, {}, {}, b, gamma, lambda, out.adv, out.ret);
  return out;
}

}  // namespace

TEST(Gae, UndiscountedSums) {
  const auto g = run({1, 1, 1}, {0, 0, 0}, {0, 0, 0}, 0, 1, 1);
  EXPECT_EQ(g.adv, (std::vector<double>{3, 2, 1}));
}

TEST(Gae, HandWorkedRecursion) {
  const auto g = run({1, 0, 1}, {0.5, 0.5, 0.5}, {0, 0, 0}, 0.5, 0.9, 0.95);
  // delta = [0.95, -0.05, 0.95]; A_2 = 0.95, A_1 = -0.05 + 0.855 * 0.95, A_0 = 0.95 + 0.855 * A_1
  EXPECT_NEAR(g.adv[2], 0.95, 1e-12);
  EXPECT_NEAR(g.adv[1], 0.76225, 1e-12);
  EXPECT_NEAR(g.adv[0], 1.60172375, 1e-12);
  for (int t = 0; t < 3; ++t) EXPECT_NEAR(g.ret[t], g.adv[t] + 0.5, 1e-15);
}

TEST(Gae, DoneMasksLaterRewards) {
  const auto a = run({1, 2, 3}, {0.1, 0.2, 0.3}, {0, 1, 0}, 0.7, 0.99, 0.95);
  const auto b = run({1, 2, -40}, {0.1, 0.2, 0.3}, {0, 1, 0}, 0.7, 0.99, 0.95);
  EXPECT_EQ(a.adv[0], b.adv[0]);
  EXPECT_EQ(a.adv[1], b.adv[1]);
  EXPECT_NE(a.adv[2], b.adv[2]);
}

TEST(Gae, BruteForceOverEveryDoneMask) {
  RngStream rng(11, {0, 0, StreamPurpose::Dynamics});
  for (std::size_t T = 1; T <= 6; ++T) {
    for (std::uint32_t mask = 0; mask < (1u << T); ++mask) {
      std::vector<double> r(T), v(T);
      std::vector<std::uint8_t> d(T);
      for (std::size_t t = 0; t < T; ++t) {
        r[t] = rng.uniform(-2, 2);
        v[t] = rng.uniform(-2, 2);
        d[t] = (mask >> t) & 1u;
      }
      const double boot = rng.uniform(-2, 2);
      const double gamma = rng.uniform(0.5, 1.0), lambda = rng.uniform(0.0, 1.0);
      const auto g = run(r, v, d, boot, gamma, lambda);
      const auto want = testing_support::brute_force_gae(r, v, d, boot, gamma, lambda);
      for (std::size_t t = 0; t < T; ++t)
        ASSERT_NEAR(g.adv[t], want[t], 1e-12) << "T=" << T << " mask=" << mask << " t=" << t;
    }
  }
}

TEST(Gae, TruncationBootstrapsFromTerminalValue) {
  const std::vector<double> r{1, 1}, v{0.5, 0.5}, tv{0, 4.0}, boot{9.0};
  const std::vector<std::uint8_t> d{0, 1}, trunc{0, 1};
  std::vector<double> adv(2), ret(2);
  compute_gae<double, double, double>({2, 1, 1}, r, v, d, trunc, tv, boot, 0.9, 1.0, adv, ret);
  EXPECT_NEAR(adv[1], 1 + 0.9 * 4.0 - 0.5, 1e-12);
  EXPECT_NEAR(adv[0], (1 + 0.9 * 0.5 - 0.5) + 0.9 * adv[1], 1e-12);

  // Same step as a termination ignores the terminal value.
  const std::vector<std::uint8_t> none{0, 0};
  compute_gae<double, double, double>({2, 1, 1}, r, v, d, none, tv, boot, 0.9, 1.0, adv, ret);
  EXPECT_NEAR(adv[1], 0.5, 1e-12);
}

TEST(Gae, EnvsAndAgentsAreIndependent) {
  // [T=3, E=2, A=2]: each (e, a) column must equal its own single-column run.
  const std::size_t T = 3, E = 2, A = 2;
  RngStream rng(3, {0, 0, StreamPurpose::Dynamics});
  std::vector<double> r(T * E * A), v(T * E * A), boot(E * A), adv(T * E * A), ret(T * E * A);
  std::vector<std::uint8_t> d(T * E);
  for (auto& x : r) x = rng.uniform(-1, 1);
  for (auto& x : v) x = rng.uniform(-1, 1);
  for (auto& x : boot) x = rng.uniform(-1, 1);
  d[1 * E + 0] = 1;
  compute_gae<double, double, double>({T, E, A}, r, v, d, {}, {}, boot, 0.97, 0.9, adv, ret);
  for (std::size_t e = 0; e < E; ++e)
    for (std::size_t a = 0; a < A; ++a) {
      std::vector<double> rc(T), vc(T);
      std::vector<std::uint8_t> dc(T);
      for (std::size_t t = 0; t < T; ++t) {
        rc[t] = r[(t * E + e) * A + a];
        vc[t] = v[(t * E + e) * A + a];
        dc[t] = d[t * E + e];
      }
      const auto g = run(rc, vc, dc, boot[e * A + a], 0.97, 0.9);
      for (std::size_t t = 0; t < T; ++t) EXPECT_EQ(adv[(t * E + e) * A + a], g.adv[t]);
    }
}

TEST(Gae, ShapeAndRangeErrors) {
  std::vector<double> r(3), v(2), b(1), adv(3), ret(3);
  std::vector<std::uint8_t> d(3);
  try {
    compute_gae<double, double, double>({3, 1, 1}, r, v, d, {}, {}, b, 0.9, 0.9, adv, ret);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  v.resize(3);
  EXPECT_THROW(
      (compute_gae<double, double, double>({3, 1, 1}, r, v, d, {}, {}, b, 1.5, 0.9, adv, ret)), Error);
}
