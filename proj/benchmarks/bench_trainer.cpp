#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "batchrl/gae.hpp"
#include "batchrl/rng.hpp"
#include "batchrl/trainer.hpp"

using namespace batchrl;

namespace {

void Gae(benchmark::State& state) {
  const std::size_t T = 32, E = static_cast<std::size_t>(state.range(0));
  RngStream rng(5, {0, 0, StreamPurpose::Dynamics});
  std::vector<float> r(T * E), v(T * E), boot(E), adv(T * E), ret(T * E);
  std::vector<std::uint8_t> d(T * E);
  for (auto& x : r) x = static_cast<float>(rng.uniform(-1, 1));
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  for (auto& x : d) x = rng.uniform() < 0.05;
  for (auto _ : state) {
    compute_gae<float, float, float>({T, E, 1}, r, v, d, {}, {}, boot, 0.99, 0.95, adv, ret);
    benchmark::DoNotOptimize(adv.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T * E));
}

// One rollout plus one PPO update with default hyperparameters.
void TrainIteration(benchmark::State& state) {
  TrainSetup setup;
  setup.env.env_name = "cartpole";
  setup.env.num_envs = static_cast<std::size_t>(state.range(0));
  setup.env.seed = 1;
  TrainBudget budget;
  budget.env_steps = setup.env.num_envs * setup.trainer.rollout_length;
  for (auto _ : state) benchmark::DoNotOptimize(train(setup, budget).curve.size());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(budget.env_steps));
}

}  // namespace

BENCHMARK(Gae)->Arg(64)->Arg(4096);
BENCHMARK(TrainIteration)->Arg(16)->Arg(256)->Unit(benchmark::kMillisecond);
