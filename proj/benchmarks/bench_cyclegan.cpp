#include <benchmark/benchmark.h>

#include <cmath>

#include "refacer/cyclegan.hpp"

namespace {

refacer::SliceImage ramp_image(std::size_t side, double phase) {
  refacer::SliceImage img(side, side);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c)
      img.at(r, c) = 0.5 + 0.4 * std::sin(phase + 0.1 * static_cast<double>(r + 2 * c));
  return img;
}

void BM_GeneratorForward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  refacer::GeneratorConfig gen;
  gen.base_channels = static_cast<std::size_t>(state.range(1));
  auto model = refacer::build_model(gen, {}, 7);
  const auto img = ramp_image(side, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(refacer::reface(model, img).pixels.data());
}
BENCHMARK(BM_GeneratorForward)->Args({64, 16})->Unit(benchmark::kMillisecond);

// One full optimisation step (both discriminators, both generators) at the
// desk-scale configuration; multiply by steps/epoch x epochs for run time.
void BM_TrainStep(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  refacer::GeneratorConfig gen;
  gen.base_channels = static_cast<std::size_t>(state.range(1));
  refacer::DiscriminatorConfig disc;
  disc.base_channels = gen.base_channels;
  auto model = refacer::build_model(gen, disc, 11);
  const std::vector<refacer::SliceImage> anon{ramp_image(side, 0.3)};
  const std::vector<refacer::SliceImage> orig{ramp_image(side, 1.1)};
  refacer::TrainConfig cfg;
  cfg.epochs = 2;
  for (auto _ : state) {
    auto log = refacer::train(model, anon, orig, cfg);
    benchmark::DoNotOptimize(log.steps.data());
  }
  state.SetItemsProcessed(state.iterations() * 2);
}
BENCHMARK(BM_TrainStep)->Args({64, 16})->Args({32, 8})->Unit(benchmark::kMillisecond);

}  // namespace
