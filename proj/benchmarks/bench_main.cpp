#include <benchmark/benchmark.h>

#include <random>

#include "ric/conv.hpp"
#include "ric/geometry.hpp"
#include "ric/nn.hpp"

using namespace ric;

namespace {

Tensor random_tensor(Shape shape, unsigned seed) {
  Tensor t(std::move(shape));
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

conv::Mode mode_of(const benchmark::State& state) {
  return state.range(0) == 0 ? conv::Mode::kStandard : conv::Mode::kRic;
}

// Args: mode (0 standard, 1 ric), channels, H.
void BM_ConvForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(1));
  const auto h = static_cast<std::size_t>(state.range(2));
  const conv::ConvSpec spec{c, c, 1, mode_of(state), true};
  const Tensor w = random_tensor(spec.weight_shape(), 1);
  const Tensor b = random_tensor({c}, 2);
  const Tensor x = random_tensor({16, c, h, h}, 3);
  const auto plan = conv::cached_plan<double>(spec.mode, spec.n, h);
  for (auto _ : state) benchmark::DoNotOptimize(conv::conv_forward(spec, w, b, x, *plan));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_ConvForward)
    ->ArgNames({"ric", "channels", "H"})
    ->Args({0, 32, 32})
    ->Args({1, 32, 32})
    ->Args({0, 64, 16})
    ->Args({1, 64, 16})
    ->Unit(benchmark::kMillisecond);

void BM_ConvBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(1));
  const auto h = static_cast<std::size_t>(state.range(2));
  const conv::ConvSpec spec{c, c, 1, mode_of(state), true};
  const Tensor w = random_tensor(spec.weight_shape(), 1);
  const Tensor x = random_tensor({16, c, h, h}, 3);
  const Tensor up = random_tensor({16, c, h, h}, 4);
  const auto plan = conv::cached_plan<double>(spec.mode, spec.n, h);
  for (auto _ : state) benchmark::DoNotOptimize(conv::conv_backward(spec, w, x, up, *plan));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_ConvBackward)
    ->ArgNames({"ric", "channels", "H"})
    ->Args({0, 32, 32})
    ->Args({1, 32, 32})
    ->Unit(benchmark::kMillisecond);

void BM_OffsetField(benchmark::State& state) {
  const geometry::GridConfig config(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(geometry::offset_field(config));
}
BENCHMARK(BM_OffsetField)->ArgNames({"n", "H"})->Args({1, 32})->Args({2, 32});

// Eval-mode forward of the full baseline, float as in deployment.
void BM_NetworkForward(benchmark::State& state) {
  auto base = nn::build_baseline(mode_of(state), 32, 0);
  auto net = nn::convert_baseline<float>(base);
  net.set_training(false);
  const auto batch = static_cast<std::size_t>(state.range(1));
  const TensorF xf = random_tensor({batch, 1, 32, 32}, 5).cast<float>();
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(xf));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch));
}
BENCHMARK(BM_NetworkForward)
    ->ArgNames({"ric", "batch"})
    ->Args({0, 100})
    ->Args({1, 100})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
