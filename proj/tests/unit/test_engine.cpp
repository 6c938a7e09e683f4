#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "alloc_hook.hpp"
#include "batchrl/engine.hpp"
#include "reference_envs.hpp"

using namespace batchrl;

namespace {

struct Batch {
  TensorStore store;
  EnvBatch batch;
  explicit Batch(EnvBatchConfig c) : batch(c, store) { store.finalize(); }
};

EnvBatchConfig cfg(std::string name, std::size_t E, std::uint64_t seed = 7, std::size_t A = 1) {
  EnvBatchConfig c;
  c.env_name = std::move(name);
  c.num_envs = E;
  c.num_agents = A;
  c.seed = seed;
  if (c.env_name == "tag") c.episode_length = 100;
  return c;
}

std::vector<double> state_of(const TensorStore& s, const char* name) {
  const auto v = s.cview<double>(name);
  return {v.begin(), v.end()};
}

}  // namespace

TEST(MakeBatch, DistinctInitialStatesSharedBase) {
  Batch b(cfg("cartpole", 4));
  const auto st = state_of(b.store, "cartpole.state");
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j)
      EXPECT_FALSE(std::equal(st.begin() + i * 4, st.begin() + i * 4 + 4, st.begin() + j * 4));
  for (double v : st) EXPECT_LE(std::abs(v), 0.05);
  Batch big(cfg("cartpole", 400));
  EXPECT_EQ(b.batch.base_params_bytes(), big.batch.base_params_bytes());
}

TEST(MakeBatch, ZeroEnvsRejected) {
  TensorStore s;
  try {
    EnvBatch b(cfg("cartpole", 0), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidParams);
  }
}

TEST(MakeBatch, UnknownEnvironment) {
  TensorStore s;
  try {
    EnvBatch b(cfg("pong", 2), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownEnvironment);
  }
}

TEST(MakeBatch, UnknownParamRejected) {
  TensorStore s;
  auto c = cfg("cartpole", 2);
  c.params["gravity_typo"] = 1.0;
  try {
    EnvBatch b(c, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidParams);
  }
}

TEST(MakeBatch, NeedsOpenStore) {
  TensorStore s;
  s.register_array({"x", {1}, ElementKind::Int32, Role::State});
  s.finalize();
  EXPECT_THROW(EnvBatch(cfg("cartpole", 2), s), Error);
}

TEST(MakeBatch, SameSeedSameInitialState) {
  for (const char* env : {"cartpole", "acrobot", "surface"}) {
    Batch a(cfg(env, 16, 3)), b(cfg(env, 16, 3)), c(cfg(env, 16, 4));
    const std::string name = std::string(env) + ".state";
    EXPECT_EQ(state_of(a.store, name.c_str()), state_of(b.store, name.c_str())) << env;
    EXPECT_NE(state_of(a.store, name.c_str()), state_of(c.store, name.c_str())) << env;
  }
}

TEST(StepAll, CartPoleFromRestMatchesReference) {
  Batch b(cfg("cartpole", 2));
  auto st = b.store.view<double>("cartpole.state");
  std::fill(st.begin(), st.end(), 0.0);
  LanePool pool(1);
  const std::int32_t actions[] = {1, 1};
  const auto out = b.batch.step_all(std::span<const std::int32_t>(actions), pool);
  ref::CartPole r;
  r.step(1);
  for (std::size_t e = 0; e < 2; ++e) {
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(st[e * 4 + k], r.state[k]);
    EXPECT_EQ(out.rewards[e], 1.0f);
    EXPECT_EQ(out.dones[e], 0);
    EXPECT_EQ(out.episode_step[e], 1);
  }
  const auto obs = b.batch.observations();
  EXPECT_EQ(obs[1], static_cast<float>(r.state[1]));
}

TEST(StepAll, InvalidDiscreteAction) {
  Batch b(cfg("cartpole", 2));
  LanePool pool(1);
  const std::int32_t actions[] = {0, 5};
  try {
    b.batch.step_all(std::span<const std::int32_t>(actions), pool);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidAction);
  }
}

TEST(StepAll, NonFiniteContinuousAction) {
  Batch b(cfg("surface", 1));
  LanePool pool(1);
  const float actions[] = {0.1f, NAN};
  EXPECT_THROW(b.batch.step_all(std::span<const float>(actions), pool), Error);
}

TEST(StepAll, LaneCountDoesNotChangeOutcome) {
  std::vector<std::vector<float>> rewards;
  std::vector<std::vector<double>> states;
  for (std::size_t W : {1u, 8u}) {
    Batch b(cfg("acrobot", 37));
    LanePool pool(W);
    RandomSampler sampler;
    const auto ranges = b.batch.lane_ranges(W);
    for (int t = 0; t < 50; ++t) {
      pool.run([&](std::size_t lane) { sampler.act(b.batch, ranges[lane], lane); });
      b.batch.step_all(pool);
      b.batch.auto_reset(pool);
    }
    const auto r = b.batch.outcome().rewards;
    rewards.emplace_back(r.begin(), r.end());
    states.push_back(state_of(b.store, "acrobot.state"));
  }
  EXPECT_EQ(rewards[0], rewards[1]);
  EXPECT_EQ(states[0], states[1]);
}

TEST(StepAll, TruncationAtEpisodeLength) {
  auto c = cfg("dummy", 2);
  c.params["done_after"] = 100;
  c.episode_length = 4;
  Batch b(c);
  LanePool pool(1);
  const std::int32_t actions[] = {0, 0};
  for (int i = 0; i < 3; ++i) EXPECT_EQ(b.batch.step_all(std::span<const std::int32_t>(actions), pool).dones[0], 0);
  const auto out = b.batch.step_all(std::span<const std::int32_t>(actions), pool);
  EXPECT_EQ(out.dones[0], 1);
  EXPECT_EQ(out.truncated[0], 1);
  EXPECT_LE(out.episode_step[0], 4);
}

TEST(AutoReset, NoDonesNoChange) {
  Batch b(cfg("cartpole", 2));
  LanePool pool(1);
  const std::int32_t actions[] = {0, 1};
  b.batch.step_all(std::span<const std::int32_t>(actions), pool);
  const auto before = state_of(b.store, "cartpole.state");
  b.batch.auto_reset(pool);
  EXPECT_EQ(state_of(b.store, "cartpole.state"), before);
}

TEST(AutoReset, ResetsOnlyDoneEnvs) {
  Batch b(cfg("cartpole", 2));
  LanePool pool(1);
  auto st = b.store.view<double>("cartpole.state");
  st[2] = 0.3;  // env 0 past the angle limit
  const std::int32_t actions[] = {0, 1};
  b.batch.step_all(std::span<const std::int32_t>(actions), pool);
  ASSERT_EQ(b.batch.outcome().dones[0], 1);
  ASSERT_EQ(b.batch.outcome().dones[1], 0);
  const auto before = state_of(b.store, "cartpole.state");
  const double* addr = st.data();
  b.batch.auto_reset(pool);
  const auto after = state_of(b.store, "cartpole.state");
  for (std::size_t k = 0; k < 4; ++k) EXPECT_LE(std::abs(after[k]), 0.05);
  EXPECT_TRUE(std::equal(after.begin() + 4, after.end(), before.begin() + 4));
  EXPECT_EQ(b.store.view<double>("cartpole.state").data(), addr);
  EXPECT_EQ(b.batch.outcome().episode_step[0], 0);
}

TEST(AutoReset, ResetSequenceIsReproducible) {
  std::vector<std::vector<double>> runs;
  for (int run = 0; run < 2; ++run) {
    Batch b(cfg("cartpole", 1, 11));
    std::vector<double> seq;
    for (int i = 0; i < 10; ++i) {
      b.batch.reset_env(0);
      const auto s = state_of(b.store, "cartpole.state");
      seq.insert(seq.end(), s.begin(), s.end());
    }
    runs.push_back(seq);
  }
  EXPECT_EQ(runs[0], runs[1]);
  EXPECT_NE(std::vector<double>(runs[0].begin(), runs[0].begin() + 4),
            std::vector<double>(runs[0].begin() + 4, runs[0].begin() + 8));
}

TEST(RunRollout, DummyArithmetic) {
  Batch b(cfg("dummy", 2));
  RolloutBuffer buf(b.store, 3);
  LanePool pool(1);
  RandomSampler sampler;
  const auto stats = run_rollout(b.batch, sampler, buf, pool);
  EXPECT_EQ(stats.episodes, 2u);
  EXPECT_DOUBLE_EQ(stats.mean_episodic_reward, 3.0);
  EXPECT_DOUBLE_EQ(stats.mean_episodic_length, 3.0);
  EXPECT_EQ(stats.steps, 6u);
  const auto dones = buf.slab<std::uint8_t>(names::kDones);
  EXPECT_EQ(std::vector<int>(dones.begin(), dones.end()), (std::vector<int>{0, 0, 0, 0, 1, 1}));
}

TEST(RunRollout, RandomCartPoleEpisodeReward) {
  // Random play on CartPole-v1 averages about 22 steps.
  Batch b(cfg("cartpole", 100, 1));
  RolloutBuffer buf(b.store, 500);
  LanePool pool(1);
  RandomSampler sampler;
  const auto stats = run_rollout(b.batch, sampler, buf, pool);
  EXPECT_GT(stats.episodes, 1000u);
  EXPECT_GE(stats.mean_episodic_reward, 15.0);
  EXPECT_LE(stats.mean_episodic_reward, 35.0);
}

TEST(RunRollout, TerminalObservationLoggedBeforeReset) {
  Batch b(cfg("dummy", 1));
  RolloutBuffer buf(b.store, 4);
  LanePool pool(1);
  RandomSampler sampler;
  run_rollout(b.batch, sampler, buf, pool);
  // dummy obs is the step counter scaled; a reset shows up in the next slot.
  const auto obs = buf.slab<float>(names::kObservations);
  const auto dones = buf.slab<std::uint8_t>(names::kDones);
  ASSERT_EQ(dones[2], 1);
  EXPECT_EQ(obs[3], obs[0]);
}

TEST(RunRollout, BufferIdenticalAcrossLaneCounts) {
  std::vector<std::uint64_t> sums;
  for (std::size_t W : {1u, 2u, 4u, 8u}) {
    Batch b(cfg("cartpole", 53, 5));
    RolloutBuffer buf(b.store, 64);
    LanePool pool(W);
    NetworkShape shape;
    Policy policy(shape);
    policy.init(3);
    PolicySampler sampler(policy);
    run_rollout(b.batch, sampler, buf, pool);
    run_rollout(b.batch, sampler, buf, pool);
    sums.push_back(buf.checksum());
  }
  for (auto s : sums) EXPECT_EQ(s, sums[0]);
}

TEST(RunRollout, PerturbingOneEnvLeavesOthersAlone) {
  // Returns the state right after the perturbed step and at the end. Env 3
  // can re-synchronize after a reset, so its divergence is checked early.
  auto run = [](bool perturb) {
    Batch b(cfg("cartpole", 8, 2));
    LanePool pool(2);
    RandomSampler sampler;
    const auto ranges = b.batch.lane_ranges(2);
    std::vector<double> early;
    for (int t = 0; t < 60; ++t) {
      if (perturb && t == 10) b.store.view<double>("cartpole.state")[3 * 4 + 1] += 0.5;
      pool.run([&](std::size_t lane) { sampler.act(b.batch, ranges[lane], lane); });
      b.batch.step_all(pool);
      if (t == 10) early = state_of(b.store, "cartpole.state");
      b.batch.auto_reset(pool);
    }
    return std::pair{early, state_of(b.store, "cartpole.state")};
  };
  const auto [a_early, a] = run(false);
  const auto [b_early, b] = run(true);
  EXPECT_FALSE(std::equal(a_early.begin() + 12, a_early.begin() + 16, b_early.begin() + 12));
  for (std::size_t e = 0; e < 8; ++e) {
    if (e == 3) continue;
    EXPECT_TRUE(std::equal(a.begin() + e * 4, a.begin() + e * 4 + 4, b.begin() + e * 4)) << "env " << e;
  }
}

TEST(RunRollout, SteadyStateDoesNotAllocate) {
  for (const char* env : {"cartpole", "tag", "surface"}) {
    Batch b(cfg(env, 32, 1, std::string(env) == "tag" ? 3 : 1));
    RolloutBuffer buf(b.store, 16);
    LanePool pool(4);
    Policy policy(NetworkShape{b.batch.obs_dim(), {64, 64},
                               b.batch.spec().action.discrete ? HeadKind::Categorical : HeadKind::Gaussian,
                               b.batch.spec().action.discrete ? b.batch.spec().action.num_actions
                                                              : b.batch.spec().action.dim});
    policy.init(1);
    PolicySampler sampler(policy);
    run_rollout(b.batch, sampler, buf, pool);
    const auto before = testing_support::allocation_count();
    for (int i = 0; i < 5; ++i) run_rollout(b.batch, sampler, buf, pool);
    EXPECT_EQ(testing_support::allocation_count() - before, 0u) << env;
  }
}

TEST(Batch, BaseParamsConstantInE) {
  std::size_t first = 0;
  for (std::size_t E : {1u, 10u, 100u, 1000u, 10000u}) {
    Batch b(cfg("cartpole", E));
    if (E == 1) first = b.batch.base_params_bytes();
    EXPECT_EQ(b.batch.base_params_bytes(), first);
    EXPECT_EQ(b.batch.variation_bytes(), E * 2 * sizeof(float));
  }
}
