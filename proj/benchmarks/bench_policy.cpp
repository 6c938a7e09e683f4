#include <benchmark/benchmark.h>

#include <vector>

#include "batchrl/policy.hpp"
#include "batchrl/rng.hpp"

using namespace batchrl;

namespace {

std::vector<float> inputs(std::size_t n) {
  RngStream rng(3, {0, 0, StreamPurpose::Dynamics});
  std::vector<float> x(n);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  return x;
}

void Forward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  Policy net(NetworkShape{4, {64, 64}, HeadKind::Categorical, 2});
  net.init(1);
  const auto x = inputs(rows * 4);
  auto ws = net.make_workspace(rows);
  for (auto _ : state) {
    net.forward(x, {}, rows, ws);
    benchmark::DoNotOptimize(ws.values.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void ForwardBackward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  Policy net(NetworkShape{4, {64, 64}, HeadKind::Categorical, 2});
  net.init(1);
  const auto x = inputs(rows * 4);
  const auto head_seed = inputs(rows * 2);
  const auto value_seed = inputs(rows);
  std::vector<float> grad(net.size());
  auto ws = net.make_workspace(rows);
  for (auto _ : state) {
    net.forward(x, {}, rows, ws);
    net.backward(x, {}, ws, head_seed, value_seed, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void FastTanh(benchmark::State& state) {
  auto x = inputs(4096);
  for (auto _ : state) {
    for (auto& v : x) v = fast_tanh(v) * 2.0f;
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * 4096);
}

}  // namespace

BENCHMARK(Forward)->Arg(1)->Arg(256)->Arg(4096);
BENCHMARK(ForwardBackward)->Arg(256)->Arg(4096);
BENCHMARK(FastTanh);
