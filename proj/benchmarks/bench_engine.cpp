#include <benchmark/benchmark.h>

#include <string>

#include "batchrl/engine.hpp"
#include "batchrl/environment.hpp"

using namespace batchrl;

namespace {

struct Batch {
  TensorStore store;
  EnvBatch batch;
  explicit Batch(const EnvBatchConfig& c) : batch(c, store) { store.finalize(); }
};

EnvBatchConfig config(const std::string& env, std::size_t num_envs) {
  EnvBatchConfig c;
  c.env_name = env;
  c.num_envs = num_envs;
  c.num_agents = env == "tag" ? 3 : 1;
  c.episode_length = find_environment(env).default_episode_length;
  c.seed = 1;
  return c;
}

// Random actions, step, auto-reset: the inner loop of a rollout without logging.
void StepAll(benchmark::State& state, const std::string& env) {
  Batch b(config(env, static_cast<std::size_t>(state.range(0))));
  LanePool pool(1);
  RandomSampler sampler;
  const auto ranges = b.batch.lane_ranges(1);
  for (auto _ : state) {
    sampler.act(b.batch, ranges[0], 0);
    b.batch.step_all(pool);
    b.batch.auto_reset(pool);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void Rollout(benchmark::State& state) {
  const auto E = static_cast<std::size_t>(state.range(0));
  Batch b(config("cartpole", E));
  RolloutBuffer buffer(b.store, 32);
  LanePool pool(1);
  Policy policy(NetworkShape{4, {64, 64}, HeadKind::Categorical, 2});
  policy.init(1);
  PolicySampler sampler(policy);
  for (auto _ : state) run_rollout(b.batch, sampler, buffer, pool);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(E * 32));
}

void LogStep(benchmark::State& state) {
  Batch b(config("cartpole", static_cast<std::size_t>(state.range(0))));
  RolloutBuffer buffer(b.store, 32);
  std::size_t t = 0;
  for (auto _ : state) {
    log_step(b.store, buffer, t, LogPoint::BeforeStep);
    log_step(b.store, buffer, t, LogPoint::AfterStep);
    t = (t + 1) % 32;
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(buffer.total_bytes() / 32));
}

}  // namespace

BENCHMARK_CAPTURE(StepAll, cartpole, std::string("cartpole"))->RangeMultiplier(8)->Range(16, 4096);
BENCHMARK_CAPTURE(StepAll, acrobot, std::string("acrobot"))->RangeMultiplier(8)->Range(16, 4096);
BENCHMARK_CAPTURE(StepAll, surface, std::string("surface"))->RangeMultiplier(8)->Range(16, 4096);
BENCHMARK_CAPTURE(StepAll, tag, std::string("tag"))->RangeMultiplier(8)->Range(16, 4096);
BENCHMARK(Rollout)->Arg(64)->Arg(1024);
BENCHMARK(LogStep)->Arg(64)->Arg(4096);
