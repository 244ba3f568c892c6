#include <benchmark/benchmark.h>

#include "segmicro/graph.hpp"
#include "segmicro/metrics.hpp"
#include "segmicro/optimizer.hpp"
#include "segmicro/rng.hpp"

using namespace segmicro;

namespace {

Tensor4<float> random_input(int size, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4<float> out({1, size, size, 1});
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(rng.real01());
  }
  return out;
}

Tensor4<float> random_targets(int size, int classes, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4<float> out({1, size, size, classes});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      out.at(0, y, x, static_cast<int>(rng.index(classes))) = 1.0f;
    }
  }
  return out;
}

ModelConfig unet_8_128() {
  ModelConfig m;
  m.arch = Arch::UNet;
  m.filters = {8, 16, 32, 64, 128};
  m.deconv_kernel = 2;
  return m;
}

ModelConfig fcn_16_64_k5() {
  ModelConfig m;
  m.arch = Arch::Fcn;
  m.filters = {16, 32, 64, 32, 16};
  m.conv_kernel = 5;
  return m;
}

void BM_unet_forward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  auto graph = Graph<float>::build(unet_8_128(), 1);
  const auto input = random_input(size, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(graph.forward(input));
  }
}
BENCHMARK(BM_unet_forward)->Arg(64)->Arg(128);

void BM_fcn_forward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  auto graph = Graph<float>::build(fcn_16_64_k5(), 1);
  const auto input = random_input(size, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(graph.forward(input));
  }
}
BENCHMARK(BM_fcn_forward)->Arg(64)->Arg(128);

void BM_unet_train_step(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  auto graph = Graph<float>::build(unet_8_128(), 1);
  Optimizer<float> opt(OptimizerKind::Adam);
  const auto input = random_input(size, 2);
  const auto targets = random_targets(size, 3, 3);
  for (auto _ : state) {
    const auto probs = graph.forward(input);
    const auto ce = cross_entropy(probs, targets);
    const auto grads = graph.backward(input, ce.grad);
    opt.step(graph.param_spans(), grads.spans());
  }
}
BENCHMARK(BM_unet_train_step)->Arg(64);

void BM_optimizer_step(benchmark::State& state) {
  auto graph = Graph<float>::build(unet_8_128(), 1);
  Optimizer<float> opt(OptimizerKind::Adam);
  const auto input = random_input(64, 2);
  const auto targets = random_targets(64, 3, 3);
  const auto probs = graph.forward(input);
  const auto ce = cross_entropy(probs, targets);
  const auto grads = graph.backward(input, ce.grad);
  for (auto _ : state) {
    opt.step(graph.param_spans(), grads.spans());
  }
}
BENCHMARK(BM_optimizer_step);

}  // namespace

BENCHMARK_MAIN();
