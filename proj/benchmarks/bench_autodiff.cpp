#include <benchmark/benchmark.h>

#include "refacer/autodiff.hpp"
#include "refacer/rng.hpp"

namespace {

using refacer::ad::Shape;
using Tensor = refacer::ad::Tensor<float>;
using Tape = refacer::ad::Tape<float>;

Tensor random_tensor(Shape s, refacer::Rng& rng) {
  Tensor t(s);
  for (auto& v : t.data) v = static_cast<float>(rng.normal());
  return t;
}

// Residual-trunk shaped conv: C -> C, 3x3, reflect pad, side = 16 at desk scale.
void BM_Conv2dForward(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto side = static_cast<std::size_t>(state.range(1));
  refacer::Rng rng(1);
  const Tensor x = random_tensor({1, channels, side, side}, rng);
  const Tensor w = random_tensor({channels, channels, 3, 3}, rng);
  for (auto _ : state) {
    Tape tape;
    auto xv = tape.constant(x);
    auto wv = tape.constant(w);
    auto y = refacer::ad::conv2d(tape, xv, wv, std::nullopt, {1, 1, refacer::ad::PadMode::Reflect});
    benchmark::DoNotOptimize(tape.value(y).data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(channels * channels * 9 * side * side));
}
BENCHMARK(BM_Conv2dForward)->Args({64, 16})->Args({16, 64})->Args({256, 64});

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto side = static_cast<std::size_t>(state.range(1));
  refacer::Rng rng(2);
  const Tensor x = random_tensor({1, channels, side, side}, rng);
  const Tensor w = random_tensor({channels, channels, 3, 3}, rng);
  for (auto _ : state) {
    Tape tape;
    auto xv = tape.input(x);
    auto wv = tape.input(w);
    auto y = refacer::ad::conv2d(tape, xv, wv, std::nullopt, {1, 1, refacer::ad::PadMode::Reflect});
    tape.backward(refacer::ad::sum(tape, y));
    benchmark::DoNotOptimize(tape.grad(wv).data.data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({64, 16})->Args({16, 64});

void BM_InstanceNorm(benchmark::State& state) {
  refacer::Rng rng(3);
  const Tensor x = random_tensor({1, 16, 64, 64}, rng);
  for (auto _ : state) {
    Tape tape;
    auto xv = tape.input(x);
    auto g = tape.constant(Tensor({1, 16, 1, 1}, 1.0f));
    auto o = tape.constant(Tensor({1, 16, 1, 1}, 0.0f));
    auto y = refacer::ad::instance_norm(tape, xv, g, o);
    tape.backward(refacer::ad::sum(tape, y));
    benchmark::DoNotOptimize(tape.grad(xv).data.data());
  }
}
BENCHMARK(BM_InstanceNorm);

}  // namespace
