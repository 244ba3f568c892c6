#include <benchmark/benchmark.h>

#include "segmicro/ops.hpp"
#include "segmicro/rng.hpp"

using namespace segmicro;

namespace {

Tensor4<float> random_tensor(Shape4 shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4<float> out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  return out;
}

ConvParams<float> random_params(int k, int in_ch, int out_ch,
                                std::uint64_t seed) {
  ConvParams<float> p;
  p.kernel = random_tensor({k, k, in_ch, out_ch}, seed);
  p.bias.assign(out_ch, 0.1f);
  return p;
}

void BM_conv2d(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int channels = static_cast<int>(state.range(1));
  const auto input = random_tensor({1, size, size, channels}, 1);
  const auto params = random_params(3, channels, channels, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(input, params));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(size) *
                          size * 9 * channels * channels);
}
BENCHMARK(BM_conv2d)
    ->Args({64, 16})
    ->Args({64, 64})
    ->Args({128, 32})
    ->Args({256, 16});

void BM_conv2d_backward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int channels = static_cast<int>(state.range(1));
  const auto input = random_tensor({1, size, size, channels}, 1);
  const auto params = random_params(3, channels, channels, 2);
  const auto upstream = random_tensor({1, size, size, channels}, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_backward(input, params, upstream));
  }
}
BENCHMARK(BM_conv2d_backward)->Args({64, 16})->Args({64, 64})->Args({128, 32});

void BM_transposed_conv2d(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int channels = static_cast<int>(state.range(1));
  const auto input = random_tensor({1, size, size, channels}, 1);
  ConvParams<float> params;
  params.kernel = random_tensor({2, 2, channels / 2, channels}, 4);
  params.bias.assign(channels / 2, 0.0f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(transposed_conv2d(input, params));
  }
}
BENCHMARK(BM_transposed_conv2d)->Args({32, 64})->Args({64, 32});

void BM_maxpool2(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto input = random_tensor({1, size, size, 32}, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(maxpool2(input));
  }
}
BENCHMARK(BM_maxpool2)->Arg(64)->Arg(256);

void BM_softmax_channels(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto logits = random_tensor({1, size, size, 4}, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax_channels(logits));
  }
}
BENCHMARK(BM_softmax_channels)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
